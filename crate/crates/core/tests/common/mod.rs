#![allow(dead_code)]

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;

/// Minimal HTTP/1.1 server answering each request with the next canned
/// `(status, body)` pair. Received request bodies are recorded.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<serde_json::Value>>>,
}

pub fn serve(responses: Vec<(u16, String)>) -> StubServer {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let url = format!("http://{}/v1/completions", listener.local_addr().unwrap());
    let requests = Arc::new(Mutex::new(Vec::new()));
    let seen = Arc::clone(&requests);
    thread::spawn(move || {
        for (status, body) in responses {
            let Ok((stream, _)) = listener.accept() else { return };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut len = 0usize;
            loop {
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    break;
                }
                let lower = line.to_ascii_lowercase();
                if let Some(v) = lower.strip_prefix("content-length:") {
                    len = v.trim().parse().unwrap_or(0);
                }
                if line == "\r\n" {
                    break;
                }
            }
            let mut buf = vec![0u8; len];
            reader.read_exact(&mut buf).unwrap();
            if let Ok(v) = serde_json::from_slice(&buf) {
                seen.lock().unwrap().push(v);
            }
            let mut stream = stream;
            let resp = format!(
                "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = stream.write_all(resp.as_bytes());
        }
    });
    StubServer { url, requests }
}

/// Brute-force TF-IDF cosine ranking, written independently of the
/// library's inverted index: dense vectors over the full vocabulary.
pub fn brute_force_tfidf(docs: &[(&str, &str)], query: &str) -> Vec<(String, f64)> {
    fn terms(s: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for c in s.chars().flat_map(char::to_lowercase) {
            if c.is_alphanumeric() {
                cur.push(c);
            } else if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }
    let doc_terms: Vec<Vec<String>> = docs.iter().map(|(_, t)| terms(t)).collect();
    let mut vocab: Vec<String> = doc_terms.iter().flatten().cloned().collect();
    vocab.sort();
    vocab.dedup();
    let n = docs.len() as f64;
    let idf: Vec<f64> = vocab
        .iter()
        .map(|v| {
            let df = doc_terms.iter().filter(|d| d.contains(v)).count() as f64;
            ((1.0 + n) / (1.0 + df)).ln() + 1.0
        })
        .collect();
    let vec_of = |ts: &[String]| -> Vec<f64> {
        vocab
            .iter()
            .zip(&idf)
            .map(|(v, w)| ts.iter().filter(|t| *t == v).count() as f64 * w)
            .collect()
    };
    let q = vec_of(&terms(query));
    let qn = q.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut scored: Vec<(String, f64)> = docs
        .iter()
        .zip(&doc_terms)
        .filter_map(|((id, _), ts)| {
            let d = vec_of(ts);
            let dot: f64 = q.iter().zip(&d).map(|(a, b)| a * b).sum();
            let dn = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            (dot > 0.0 && qn > 0.0).then(|| (id.to_string(), dot / (qn * dn)))
        })
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    scored
}

/// A random filter instance: documents, a scripted mock, and the
/// `(doc_id, index)` pairs a brute-force PMI check says to keep.
pub struct FilterCase {
    pub question: String,
    pub docs: Vec<(String, String)>,
    pub script: skill_rag::gateway::MockScript,
    pub expected: Vec<(String, usize)>,
}

pub fn random_filter_case<R: rand::Rng>(rng: &mut R, case: usize) -> FilterCase {
    use skill_rag::templates::Templates;
    let t = Templates::default();
    let question = format!("Which fact matters for case {case}?");
    let levels = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9, 1.0];
    let p_base = levels[rng.gen_range(1..levels.len())];
    let mut script = skill_rag::gateway::MockScript::new()
        .with_prefix_prob(&t.skill_prompt(&question, None), "Yes", p_base)
        .unwrap();
    let n_segments = rng.gen_range(0..=10usize);
    let n_docs = rng.gen_range(1..=3usize);
    let mut per_doc = vec![Vec::new(); n_docs];
    for s in 0..n_segments {
        per_doc[rng.gen_range(0..n_docs)].push(s);
    }
    let mut docs = Vec::new();
    let mut expected = Vec::new();
    for (d, segs) in per_doc.iter().enumerate() {
        let doc_id = format!("c{case}-d{d}");
        let mut sentences = Vec::new();
        for (index, s) in segs.iter().enumerate() {
            let sentence = format!("Fact {s} of case {case} is here.");
            let p = if rng.gen_bool(0.2) { p_base } else { levels[rng.gen_range(0..levels.len())] };
            script = script
                .with_prefix_prob(&t.skill_prompt(&question, Some(&sentence)), "Yes", p)
                .unwrap();
            if (p.max(1e-9) / p_base.max(1e-9)).ln() > 0.0 {
                expected.push((doc_id.clone(), index));
            }
            sentences.push(sentence);
        }
        docs.push((doc_id, sentences.join(" ")));
    }
    FilterCase { question, docs, script, expected }
}
