use std::fs;

use proptest::prelude::*;
use skill_rag::gateway::{MockBackend, MockScript};
use skill_rag::io;
use skill_rag::probe::{
    acc_rate, classify, load_qa, Label, Prober, QaItem, Sample, SelfKnowledgeRecord,
};
use skill_rag::templates::Templates;
use skill_rag::Error;

fn write_qa(dir: &std::path::Path, items: &[QaItem]) -> std::path::PathBuf {
    let p = dir.join("qa.jsonl");
    io::write_records(&p, items).unwrap();
    p
}

fn items(n: usize) -> Vec<QaItem> {
    (0..n)
        .map(|i| QaItem::new(&format!("q{i}"), &format!("Question number {i}?"), &[&format!("answer {i}")]))
        .collect()
}

#[test]
fn all_correct_summary() {
    let dir = tempfile::tempdir().unwrap();
    let qa = items(3);
    let t = Templates::default();
    let mut script = MockScript::new();
    for it in &qa {
        script = script.with_answer(&t.answer_prompt(&it.question), &it.gold_answers[0]).unwrap();
    }
    let model = MockBackend::new(script);
    let out = dir.path().join("sk.jsonl");
    let s = Prober::new(&model).build_dataset(&write_qa(dir.path(), &qa), &out).unwrap();
    assert_eq!((s.count, s.known_count, s.unknown_count, s.mean_acc_rate), (3, 3, 0, 1.0));
    assert!(s.failures.is_empty());
}

#[test]
fn empty_input_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let qa = dir.path().join("qa.jsonl");
    fs::write(&qa, "").unwrap();
    let model = MockBackend::new(MockScript::new());
    let out = dir.path().join("sk.jsonl");
    assert!(matches!(Prober::new(&model).build_dataset(&qa, &out), Err(Error::EmptyInput(_))));
    assert!(!out.exists());
}

#[test]
fn mixed_script_counts_match_recount_of_emitted_file() {
    let dir = tempfile::tempdir().unwrap();
    let qa = items(12);
    let t = Templates::default();
    let mut script = MockScript::new();
    for (i, it) in qa.iter().enumerate() {
        let right = i as f64 / 11.0;
        script = script
            .with_completions(
                &t.answer_prompt(&it.question),
                [(it.gold_answers[0].clone(), right), ("wrong".to_string(), 1.0 - right)],
            )
            .unwrap();
    }
    let model = MockBackend::new(script);
    let out = dir.path().join("sk.jsonl");
    let summary = Prober::new(&model)
        .seed(5)
        .build_dataset(&write_qa(dir.path(), &qa), &out)
        .unwrap();

    // recount from the emitted file only
    let lines: Vec<serde_json::Value> = fs::read_to_string(&out)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 12);
    let mut known = 0;
    let mut rate_sum = 0.0;
    for (line, item) in lines.iter().zip(&qa) {
        assert_eq!(line["question_id"], item.id.as_str());
        let samples = line["samples"].as_array().unwrap();
        assert_eq!(samples.len(), 10);
        let correct = samples.iter().filter(|s| s["correct"] == true).count();
        let rate = correct as f64 / 10.0;
        assert_eq!(line["acc_rate"].as_f64().unwrap(), rate);
        if rate > 0.8 {
            known += 1;
            assert_eq!(line["label"], "Known");
        } else {
            assert_eq!(line["label"], "Unknown");
        }
        rate_sum += rate;
    }
    assert_eq!(summary.known_count, known);
    assert_eq!(summary.unknown_count, 12 - known);
    assert!((summary.mean_acc_rate - rate_sum / 12.0).abs() < 1e-12);
}

#[test]
fn failures_are_skipped_and_counted() {
    let dir = tempfile::tempdir().unwrap();
    let qa = items(10);
    let t = Templates::default();
    let mut script = MockScript::new();
    // q0 is left unscripted: 1 of 10 failing is allowed
    for it in &qa[1..] {
        script = script.with_answer(&t.answer_prompt(&it.question), "x").unwrap();
    }
    let model = MockBackend::new(script);
    let out = dir.path().join("sk.jsonl");
    let s = Prober::new(&model).build_dataset(&write_qa(dir.path(), &qa), &out).unwrap();
    assert_eq!(s.count, 9);
    assert_eq!(s.failures.len(), 1);
    assert_eq!(s.failures[0].question_id, "q0");
    let written = fs::read_to_string(&out).unwrap().lines().count();
    assert_eq!(written + s.failures.len(), qa.len());
}

#[test]
fn more_than_ten_percent_failures_aborts_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let qa = items(10);
    let t = Templates::default();
    let mut script = MockScript::new();
    for it in &qa[2..] {
        script = script.with_answer(&t.answer_prompt(&it.question), "x").unwrap();
    }
    let model = MockBackend::new(script);
    let out = dir.path().join("sk.jsonl");
    let err = Prober::new(&model).build_dataset(&write_qa(dir.path(), &qa), &out).unwrap_err();
    assert!(matches!(err, Error::TooManyFailures { failed: 2, total: 10 }));
    assert!(!out.exists());
}

#[test]
fn parallel_probe_matches_sequential_order() {
    let qa = items(20);
    let t = Templates::default();
    let mut script = MockScript::new();
    for it in &qa {
        script = script
            .with_completions(&t.answer_prompt(&it.question), [(it.gold_answers[0].as_str(), 0.5), ("no", 0.5)])
            .unwrap();
    }
    let model = MockBackend::new(script);
    let seq = Prober::new(&model).probe_all(&qa).unwrap();
    let par = Prober::new(&model).jobs(4).probe_all(&qa).unwrap();
    assert_eq!(seq, par);
}

#[test]
fn duplicate_ids_rejected_on_load() {
    let dir = tempfile::tempdir().unwrap();
    let mut qa = items(2);
    qa[1].id = qa[0].id.clone();
    assert!(matches!(load_qa(&write_qa(dir.path(), &qa)), Err(Error::DuplicateId(_))));
}

proptest! {
    #[test]
    fn acc_rate_ignores_sample_order(flags in prop::collection::vec(any::<bool>(), 1..30), rot in 0usize..30) {
        let samples: Vec<Sample> = flags.iter().map(|&c| Sample { text: String::new(), correct: c }).collect();
        let mut shuffled = samples.clone();
        let len = shuffled.len();
        shuffled.rotate_left(rot % len);
        shuffled.reverse();
        prop_assert_eq!(acc_rate(&samples), acc_rate(&shuffled));
    }

    #[test]
    fn known_is_monotone_in_threshold(correct in 0usize..=10, t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let samples: Vec<Sample> = (0..10).map(|i| Sample { text: String::new(), correct: i < correct }).collect();
        let rec = SelfKnowledgeRecord::from_samples("q", samples, t1).unwrap();
        let (hi, lo) = if t1 >= t2 { (t1, t2) } else { (t2, t1) };
        if classify(&rec, hi) == Label::Known {
            prop_assert_eq!(classify(&rec, lo), Label::Known);
        }
    }
}
