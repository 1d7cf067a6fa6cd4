//! In-memory TF-IDF retriever.
//!
//! Terms are lowercased alphanumeric runs. Weights are raw term frequency
//! times the smoothed inverse document frequency
//! `ln((1 + N) / (1 + df)) + 1`, and documents are ranked by cosine
//! similarity to the query vector. The title and body are indexed together.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusDoc {
    pub doc_id: String,
    #[serde(default)]
    pub title: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub doc: CorpusDoc,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSummary {
    pub doc_count: usize,
    pub term_count: usize,
}

/// A source of ranked documents for a question.
pub trait Retriever: Send + Sync {
    /// Up to `k` documents with positive score, best first, ties broken by
    /// ascending `doc_id`.
    fn retrieve(&self, question: &str, k: usize) -> Result<Vec<RetrievalResult>>;
}

pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_string)
        .collect()
}

pub fn smoothed_idf(n_docs: usize, df: usize) -> f64 {
    ((1.0 + n_docs as f64) / (1.0 + df as f64)).ln() + 1.0
}

fn term_counts(tokens: Vec<String>) -> HashMap<String, f64> {
    let mut tf = HashMap::new();
    for t in tokens {
        *tf.entry(t).or_insert(0.0) += 1.0;
    }
    tf
}

#[derive(Debug, Clone, Default)]
pub struct TfIdfIndex {
    docs: Vec<CorpusDoc>,
    /// term -> (doc position, tf)
    postings: HashMap<String, Vec<(usize, f64)>>,
    idf: HashMap<String, f64>,
    norms: Vec<f64>,
}

impl TfIdfIndex {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_docs(docs: Vec<CorpusDoc>) -> Result<Self> {
        let mut index = Self::new();
        index.replace(docs)?;
        Ok(index)
    }

    /// Loads a corpus file (one `{doc_id, title, text}` record per line),
    /// replacing any existing index.
    pub fn ingest(&mut self, corpus_path: &Path) -> Result<IndexSummary> {
        let docs: Vec<CorpusDoc> = io::read_records(corpus_path)?;
        for (i, d) in docs.iter().enumerate() {
            if d.text.trim().is_empty() {
                return Err(Error::MalformedRecord {
                    path: corpus_path.to_path_buf(),
                    line: i + 1,
                    reason: format!("document {} has empty text", d.doc_id),
                });
            }
        }
        self.replace(docs)
    }

    pub fn replace(&mut self, docs: Vec<CorpusDoc>) -> Result<IndexSummary> {
        let mut seen = HashSet::new();
        for d in &docs {
            if !seen.insert(d.doc_id.as_str()) {
                return Err(Error::DuplicateId(d.doc_id.clone()));
            }
            if d.text.trim().is_empty() {
                return Err(Error::invalid("text", format!("document {} is empty", d.doc_id)));
            }
        }

        let mut postings: HashMap<String, Vec<(usize, f64)>> = HashMap::new();
        for (pos, d) in docs.iter().enumerate() {
            let mut tf: Vec<_> = term_counts(tokenize(&format!("{} {}", d.title, d.text)))
                .into_iter()
                .collect();
            tf.sort_by(|a, b| a.0.cmp(&b.0));
            for (term, count) in tf {
                postings.entry(term).or_default().push((pos, count));
            }
        }
        let idf: HashMap<String, f64> = postings
            .iter()
            .map(|(t, p)| (t.clone(), smoothed_idf(docs.len(), p.len())))
            .collect();
        let mut sq = vec![0.0; docs.len()];
        for (term, list) in &postings {
            let w = idf[term];
            for &(pos, tf) in list {
                sq[pos] += (tf * w).powi(2);
            }
        }

        self.norms = sq.into_iter().map(f64::sqrt).collect();
        self.docs = docs;
        self.postings = postings;
        self.idf = idf;
        Ok(self.summary())
    }

    pub fn summary(&self) -> IndexSummary {
        IndexSummary {
            doc_count: self.docs.len(),
            term_count: self.postings.len(),
        }
    }

    pub fn docs(&self) -> &[CorpusDoc] {
        &self.docs
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }
}

impl Retriever for TfIdfIndex {
    fn retrieve(&self, question: &str, k: usize) -> Result<Vec<RetrievalResult>> {
        if self.docs.is_empty() {
            return Err(Error::EmptyIndex);
        }
        if question.trim().is_empty() {
            return Err(Error::invalid("question", "must be non-empty"));
        }
        if k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        let query = term_counts(tokenize(question));
        let mut q_norm_sq = 0.0;
        let mut dots = vec![0.0; self.docs.len()];
        let mut terms: Vec<_> = query.iter().collect();
        terms.sort_by(|a, b| a.0.cmp(b.0));
        for (term, qtf) in terms {
            let Some(&w) = self.idf.get(term) else {
                continue;
            };
            let qw = qtf * w;
            q_norm_sq += qw * qw;
            for &(pos, tf) in &self.postings[term] {
                dots[pos] += qw * tf * w;
            }
        }
        if q_norm_sq == 0.0 {
            return Ok(Vec::new());
        }
        let q_norm = q_norm_sq.sqrt();
        let mut scored: Vec<(usize, f64)> = dots
            .into_iter()
            .enumerate()
            .filter(|&(_, d)| d > 0.0)
            .map(|(pos, d)| (pos, d / (q_norm * self.norms[pos])))
            .collect();
        scored.sort_by(|a, b| {
            b.1.total_cmp(&a.1)
                .then_with(|| self.docs[a.0].doc_id.cmp(&self.docs[b.0].doc_id))
        });
        scored.truncate(k);
        Ok(scored
            .into_iter()
            .map(|(pos, score)| RetrievalResult {
                doc: self.docs[pos].clone(),
                score,
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn doc(id: &str, text: &str) -> CorpusDoc {
        CorpusDoc { doc_id: id.into(), title: String::new(), text: text.into() }
    }

    fn toy() -> TfIdfIndex {
        TfIdfIndex::from_docs(vec![
            doc("a", "Paris is the capital of France."),
            doc("b", "Berlin is the capital of Germany."),
            doc("c", "The Seine flows through Paris."),
        ])
        .unwrap()
    }

    #[test]
    fn summary_counts_vocabulary() {
        let s = toy().summary();
        assert_eq!(s.doc_count, 3);
        let vocab: HashSet<String> = toy().docs().iter().flat_map(|d| tokenize(&d.text)).collect();
        assert_eq!(s.term_count, vocab.len());
    }

    #[test]
    fn duplicate_id_named() {
        let err = TfIdfIndex::from_docs(vec![doc("x", "one"), doc("x", "two")]).unwrap_err();
        assert!(err.to_string().contains("`x`"));
    }

    #[test]
    fn large_k_returns_every_matching_doc_sorted() {
        let res = toy().retrieve("Paris capital Seine Germany", 10).unwrap();
        assert_eq!(res.len(), 3);
        assert!(res.windows(2).all(|w| w[0].score >= w[1].score));
    }

    #[test]
    fn no_shared_terms_gives_nothing() {
        assert!(toy().retrieve("quantum chromodynamics", 3).unwrap().is_empty());
    }

    #[test]
    fn ties_break_by_doc_id() {
        let idx = TfIdfIndex::from_docs(vec![doc("z", "apple pie"), doc("m", "apple pie")]).unwrap();
        let ids: Vec<_> = idx.retrieve("apple", 2).unwrap().into_iter().map(|r| r.doc.doc_id).collect();
        assert_eq!(ids, ["m", "z"]);
    }

    #[test]
    fn empty_index_and_question_fail() {
        assert!(matches!(TfIdfIndex::new().retrieve("x", 1), Err(Error::EmptyIndex)));
        assert!(toy().retrieve("  ", 1).is_err());
    }

    #[test]
    fn retrieval_is_deterministic() {
        let idx = toy();
        assert_eq!(idx.retrieve("capital of France", 2).unwrap(), idx.retrieve("capital of France", 2).unwrap());
    }
}
