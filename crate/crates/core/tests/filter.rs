mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use skill_rag::filter::{filter_documents, EmptyFallback, FilterConfig};
use skill_rag::gateway::{MockBackend, MockScript};
use skill_rag::templates::Templates;

#[test]
fn retained_set_matches_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..100 {
        let c = common::random_filter_case(&mut rng, case);
        let model = MockBackend::new(c.script);
        let out = filter_documents(&model, &Templates::default(), &c.question, &c.docs, &FilterConfig::default())
            .unwrap();
        let got: Vec<(String, usize)> = out.retained.iter().map(|s| (s.doc_id.clone(), s.index)).collect();
        assert_eq!(got, c.expected, "case {case}");
        assert!(!out.fallback_applied);
        for s in &out.retained {
            assert!(s.pmi.unwrap() > 0.0);
        }
        for s in &out.dropped {
            assert!(s.pmi.unwrap() <= 0.0);
        }
    }
}

fn three_sentence_case(ps: [f64; 3]) -> (MockBackend, Vec<(String, String)>) {
    let t = Templates::default();
    let q = "What is it?";
    let sentences = ["Alpha one.", "Beta two.", "Gamma three."];
    let mut script = MockScript::new().with_prefix_prob(&t.skill_prompt(q, None), "Yes", 0.5).unwrap();
    for (s, p) in sentences.iter().zip(ps) {
        script = script.with_prefix_prob(&t.skill_prompt(q, Some(s)), "Yes", p).unwrap();
    }
    (MockBackend::new(script), vec![("d".into(), sentences.join(" "))])
}

#[test]
fn equal_probability_is_dropped() {
    let (model, docs) = three_sentence_case([0.5, 0.5, 0.5]);
    let out = filter_documents(&model, &Templates::default(), "What is it?", &docs, &FilterConfig::default()).unwrap();
    assert!(out.retained.is_empty());
    assert_eq!(out.dropped.len(), 3);
}

#[test]
fn keep_top_one_fallback() {
    let (model, docs) = three_sentence_case([0.1, 0.4, 0.4]);
    let config = FilterConfig {
        empty_fallback: EmptyFallback::KeepTopOne,
        ..FilterConfig::default()
    };
    let out = filter_documents(&model, &Templates::default(), "What is it?", &docs, &config).unwrap();
    assert!(out.fallback_applied);
    assert_eq!(out.retained.len(), 1);
    assert_eq!(out.retained[0].index, 1);
    assert_eq!(out.total_segments(), 3);
}

#[test]
fn zero_probability_is_floored() {
    let (model, docs) = three_sentence_case([0.0, 1.0, 0.5]);
    let out = filter_documents(&model, &Templates::default(), "What is it?", &docs, &FilterConfig::default()).unwrap();
    let pmis: Vec<f64> = out.retained.iter().chain(&out.dropped).map(|s| s.pmi.unwrap()).collect();
    assert!(pmis.iter().all(|p| p.is_finite()));
    assert!((out.dropped[0].pmi.unwrap() - (1e-9f64 / 0.5).ln()).abs() < 1e-9);
    assert_eq!(out.retained.len(), 1);
}

#[test]
fn higher_threshold_retains_subset() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for case in 0..30 {
        let c = common::random_filter_case(&mut rng, case);
        let model = MockBackend::new(c.script);
        let t = Templates::default();
        let lo = filter_documents(&model, &t, &c.question, &c.docs, &FilterConfig::default()).unwrap();
        let hi_cfg = FilterConfig { pmi_threshold: 0.5, ..FilterConfig::default() };
        let hi = filter_documents(&model, &t, &c.question, &c.docs, &hi_cfg).unwrap();
        assert!(hi.retained.iter().all(|s| lo.retained.contains(s)));
    }
}
