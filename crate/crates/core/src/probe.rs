//! Self-knowledge dataset construction.
//!
//! Each question is answered `n` times with the question-only prompt; the
//! fraction of sampled answers that match a gold answer is the question's
//! `acc_rate`, and questions whose `acc_rate` exceeds the threshold are
//! labelled [`Label::Known`].

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{GenParams, LanguageModel, Prompt};
use crate::io;
use crate::templates::Templates;

pub const DEFAULT_SAMPLES: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.8;

/// A question with its accepted answers. An empty answer list marks an
/// unanswerable question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QaItem {
    pub id: String,
    pub question: String,
    #[serde(rename = "answers")]
    pub gold_answers: Vec<String>,
}

impl QaItem {
    pub fn new(id: &str, question: &str, answers: &[&str]) -> Self {
        QaItem {
            id: id.into(),
            question: question.into(),
            gold_answers: answers.iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn is_unanswerable(&self) -> bool {
        self.gold_answers.is_empty()
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.is_empty() {
            return Err("empty id".into());
        }
        if self.question.trim().is_empty() {
            return Err(format!("{}: empty question", self.id));
        }
        if let Some(g) = self.gold_answers.iter().find(|g| normalize(g).is_empty()) {
            return Err(format!("{}: gold answer {g:?} is empty after normalization", self.id));
        }
        Ok(())
    }
}

/// Loads a QA file (one `{id, question, answers}` record per line), checking
/// id uniqueness and answer well-formedness.
pub fn load_qa(path: &Path) -> Result<Vec<QaItem>> {
    let items: Vec<QaItem> = io::read_records(path)?;
    let mut seen = HashSet::new();
    for (i, item) in items.iter().enumerate() {
        item.validate().map_err(|reason| Error::MalformedRecord {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        })?;
        if !seen.insert(item.id.as_str()) {
            return Err(Error::DuplicateId(item.id.clone()));
        }
    }
    Ok(items)
}

const ARTICLES: [&str; 3] = ["a", "an", "the"];

/// Lowercases, removes punctuation, collapses whitespace and drops a leading
/// article.
pub fn normalize(text: &str) -> String {
    let lowered = text.to_lowercase();
    let stripped: String = lowered
        .chars()
        .filter(|c| !c.is_ascii_punctuation() && !is_unicode_punct(*c))
        .collect();
    let mut words = stripped.split_whitespace().peekable();
    if words.peek().is_some_and(|w| ARTICLES.contains(w)) {
        words.next();
    }
    words.collect::<Vec<_>>().join(" ")
}

fn is_unicode_punct(c: char) -> bool {
    matches!(c, '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2013}' | '\u{2014}' | '\u{2026}')
}

fn contains_words(haystack: &str, needle: &str) -> bool {
    format!(" {haystack} ").contains(&format!(" {needle} "))
}

/// True when the normalized candidate contains, or is contained in, some
/// normalized gold answer, on word boundaries. An empty candidate never
/// matches.
pub fn match_answer(candidate: &str, golds: &[String]) -> bool {
    let cand = normalize(candidate);
    if cand.is_empty() {
        return false;
    }
    golds.iter().map(|g| normalize(g)).any(|gold| {
        !gold.is_empty() && (contains_words(&cand, &gold) || contains_words(&gold, &cand))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Label {
    Known,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub text: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfKnowledgeRecord {
    pub question_id: String,
    pub samples: Vec<Sample>,
    pub acc_rate: f64,
    pub label: Label,
    pub threshold_used: f64,
}

impl SelfKnowledgeRecord {
    /// Builds a record from scored samples, labelling it against `threshold`.
    pub fn from_samples(question_id: &str, samples: Vec<Sample>, threshold: f64) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("samples", "must be non-empty"));
        }
        let acc_rate = acc_rate(&samples);
        Ok(SelfKnowledgeRecord {
            question_id: question_id.into(),
            samples,
            acc_rate,
            label: classify_rate(acc_rate, threshold),
            threshold_used: threshold,
        })
    }
}

/// Fraction of samples marked correct.
pub fn acc_rate(samples: &[Sample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    samples.iter().filter(|s| s.correct).count() as f64 / samples.len() as f64
}

fn classify_rate(acc_rate: f64, threshold: f64) -> Label {
    if acc_rate > threshold {
        Label::Known
    } else {
        Label::Unknown
    }
}

/// Known iff `acc_rate > threshold` (strict).
pub fn classify(record: &SelfKnowledgeRecord, threshold: f64) -> Label {
    classify_rate(record.acc_rate, threshold)
}

pub(crate) fn check_unit(name: &'static str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be in [0, 1], got {v}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFailure {
    pub question_id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub count: usize,
    pub known_count: usize,
    pub unknown_count: usize,
    pub mean_acc_rate: f64,
    pub failures: Vec<ProbeFailure>,
}

impl DatasetSummary {
    pub fn from_records(records: &[SelfKnowledgeRecord], failures: Vec<ProbeFailure>) -> Self {
        let known = records.iter().filter(|r| r.label == Label::Known).count();
        let mean = if records.is_empty() {
            0.0
        } else {
            records.iter().map(|r| r.acc_rate).sum::<f64>() / records.len() as f64
        };
        DatasetSummary {
            count: records.len(),
            known_count: known,
            unknown_count: records.len() - known,
            mean_acc_rate: mean,
            failures,
        }
    }
}

/// Fraction of failed items above which a batch run is aborted.
pub const MAX_FAILURE_FRACTION: f64 = 0.1;

pub(crate) fn too_many_failures(failed: usize, total: usize) -> bool {
    failed as f64 > MAX_FAILURE_FRACTION * total as f64
}

/// Samples answers from a model and turns them into self-knowledge records.
pub struct Prober<'a> {
    model: &'a dyn LanguageModel,
    templates: Templates,
    samples: usize,
    threshold: f64,
    seed: u64,
    jobs: usize,
}

impl<'a> Prober<'a> {
    pub fn new(model: &'a dyn LanguageModel) -> Self {
        Prober {
            model,
            templates: Templates::default(),
            samples: DEFAULT_SAMPLES,
            threshold: DEFAULT_THRESHOLD,
            seed: 0,
            jobs: 1,
        }
    }

    pub fn samples(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("n", "must be at least 1"));
        }
        self.samples = n;
        Ok(self)
    }

    pub fn threshold(mut self, theta: f64) -> Result<Self> {
        check_unit("theta", theta)?;
        self.threshold = theta;
        Ok(self)
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    pub fn templates(mut self, templates: Templates) -> Self {
        self.templates = templates;
        self
    }

    /// Draws `n` answers for one question and scores each against the golds.
    pub fn probe_question(&self, item: &QaItem) -> Result<SelfKnowledgeRecord> {
        let prompt = Prompt::new(self.templates.answer_prompt(&item.question))?;
        let params = GenParams::sampling(self.samples, Some(self.seed));
        let completions = self
            .model
            .generate(&prompt, &params)
            .map_err(|e| Error::for_question(&item.id, e))?;
        if completions.len() != self.samples {
            return Err(Error::for_question(
                &item.id,
                Error::MalformedResponse(format!(
                    "expected {} samples, got {}",
                    self.samples,
                    completions.len()
                )),
            ));
        }
        let samples = completions
            .into_iter()
            .map(|c| Sample {
                correct: match_answer(&c.text, &item.gold_answers),
                text: c.text,
            })
            .collect();
        SelfKnowledgeRecord::from_samples(&item.id, samples, self.threshold)
    }

    /// Probes every item, preserving input order. Items that fail are left
    /// out and listed in the summary; more than 10% failures aborts.
    pub fn probe_all(
        &self,
        items: &[QaItem],
    ) -> Result<(Vec<SelfKnowledgeRecord>, Vec<ProbeFailure>)> {
        let results = crate::parallel::map_ordered(self.jobs, items, |item| self.probe_question(item))?;
        let mut records = Vec::with_capacity(items.len());
        let mut failures = Vec::new();
        for (item, res) in items.iter().zip(results) {
            match res {
                Ok(r) => records.push(r),
                Err(e) => failures.push(ProbeFailure {
                    question_id: item.id.clone(),
                    error: e.to_string(),
                }),
            }
        }
        if too_many_failures(failures.len(), items.len()) {
            return Err(Error::TooManyFailures {
                failed: failures.len(),
                total: items.len(),
            });
        }
        Ok((records, failures))
    }

    /// Reads `qa_path`, probes every question and writes one record per line
    /// to `out_path`. The output file is written only on success.
    pub fn build_dataset(&self, qa_path: &Path, out_path: &Path) -> Result<DatasetSummary> {
        let items = load_qa(qa_path)?;
        if items.is_empty() {
            return Err(Error::EmptyInput(qa_path.to_path_buf()));
        }
        let (records, failures) = self.probe_all(&items)?;
        io::write_records(out_path, &records)?;
        Ok(DatasetSummary::from_records(&records, failures))
    }
}
