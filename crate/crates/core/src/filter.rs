//! Sentence-level evidence filtering by confidence gain.
//!
//! Retrieved documents are split into sentences. Each sentence is scored by
//! how much it raises the model's probability of answering "Yes" to the
//! self-knowledge prompt, measured as `ln(P(yes | sentence, q) / P(yes | q))`.
//! Only sentences with a positive gain are kept.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gateway::{LanguageModel, Prompt};
use crate::templates::Templates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub text: String,
    pub doc_id: String,
    /// Position within the source document.
    pub index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pmi: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmptyFallback {
    /// Answer without context.
    NoContext,
    /// Keep the single highest-scoring segment.
    KeepTopOne,
}

impl std::str::FromStr for EmptyFallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" | "no-context" | "NoContext" => Ok(EmptyFallback::NoContext),
            "top1" | "keep-top-one" | "KeepTopOne" => Ok(EmptyFallback::KeepTopOne),
            other => Err(Error::invalid(
                "fallback",
                format!("expected `no-context` or `keep-top-one`, got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub yes_prefix: String,
    /// Segments need a PMI strictly above this value.
    pub pmi_threshold: f64,
    /// Lower clamp applied to every probability before taking logs.
    pub prob_floor: f64,
    pub empty_fallback: EmptyFallback,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            yes_prefix: "Yes".into(),
            pmi_threshold: 0.0,
            prob_floor: 1e-9,
            empty_fallback: EmptyFallback::NoContext,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.yes_prefix.is_empty() {
            return Err(Error::invalid("yes_prefix", "must be non-empty"));
        }
        if !(self.prob_floor > 0.0 && self.prob_floor < 1.0) {
            return Err(Error::invalid("prob_floor", "must be in (0, 1)"));
        }
        if self.pmi_threshold.is_nan() {
            return Err(Error::invalid("pmi_threshold", "must be a number"));
        }
        Ok(())
    }
}

// Abbreviations whose trailing period never ends a sentence. Compared
// case-insensitively against the whole token.
const ABBREVIATIONS: &[&str] = &[
    "dr.", "mr.", "mrs.", "ms.", "prof.", "sr.", "jr.", "st.", "mt.", "ft.", "gen.", "col.",
    "lt.", "capt.", "sgt.", "gov.", "sen.", "rep.", "rev.", "hon.", "vs.", "etc.", "e.g.",
    "i.e.", "cf.", "al.", "approx.", "no.", "nos.", "vol.", "fig.", "figs.", "p.", "pp.",
    "ch.", "sec.", "inc.", "ltd.", "co.", "corp.", "dept.", "univ.", "u.s.", "u.k.", "u.n.",
    "u.s.a.", "e.u.", "d.c.", "a.m.", "p.m.", "jan.", "feb.", "mar.", "apr.", "jun.", "jul.",
    "aug.", "sep.", "sept.", "oct.", "nov.", "dec.", "b.c.", "a.d.", "ph.d.", "m.d.",
];

const CLOSERS: &[char] = &['"', '\'', ')', ']', '\u{201D}', '\u{2019}'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '\u{201C}', '\u{2018}'];

fn ends_sentence(token: &str) -> bool {
    let core = token.trim_end_matches(CLOSERS);
    if !core.ends_with(['.', '!', '?']) {
        return false;
    }
    if core.ends_with('.') && !core.ends_with("..") {
        let lower = core.to_lowercase();
        let word = lower.trim_start_matches(OPENERS);
        if ABBREVIATIONS.contains(&word) {
            return false;
        }
    }
    true
}

fn starts_sentence(token: &str) -> bool {
    token
        .trim_start_matches(OPENERS)
        .chars()
        .next()
        .is_some_and(|c| c.is_uppercase() || c.is_ascii_digit())
}

/// Splits text into sentences on `.`, `!` or `?` followed by whitespace and
/// an uppercase letter or digit, unless the period closes a known
/// abbreviation. Joining the result with single spaces reproduces the input
/// with its whitespace collapsed.
pub fn split_sentences(text: &str) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let mut out = Vec::new();
    let mut start = 0;
    for i in 0..tokens.len() {
        let last = i + 1 == tokens.len();
        if last || (ends_sentence(tokens[i]) && starts_sentence(tokens[i + 1])) {
            out.push(tokens[start..=i].join(" "));
            start = i + 1;
        }
    }
    out
}

pub fn segment_document(doc_text: &str, doc_id: &str) -> Vec<Segment> {
    split_sentences(doc_text)
        .into_iter()
        .enumerate()
        .map(|(index, text)| Segment {
            text,
            doc_id: doc_id.to_string(),
            index,
            pmi: None,
        })
        .collect()
}

/// Pointwise mutual information `ln(p_with / p_without)`, in nats.
pub fn pmi(p_with: f64, p_without: f64) -> f64 {
    (p_with / p_without).ln()
}

/// `P(yes_prefix | prompt)` for the self-knowledge prompt, with the segment as
/// a context line when given, clamped below by `prob_floor`.
pub fn yes_probability(
    model: &dyn LanguageModel,
    templates: &Templates,
    question: &str,
    segment: Option<&Segment>,
    config: &FilterConfig,
) -> Result<f64> {
    if question.trim().is_empty() {
        return Err(Error::invalid("question", "must be non-empty"));
    }
    let text = templates.skill_prompt(question, segment.map(|s| s.text.as_str()));
    let p = model.prefix_probability(&Prompt::new(text)?, &config.yes_prefix)?;
    Ok(p.max(config.prob_floor).min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterOutcome {
    pub retained: Vec<Segment>,
    pub dropped: Vec<Segment>,
    pub p_base: f64,
    /// The retained set came from the empty-set fallback rather than the
    /// threshold.
    pub fallback_applied: bool,
}

impl FilterOutcome {
    pub fn total_segments(&self) -> usize {
        self.retained.len() + self.dropped.len()
    }
}

/// Scores every sentence of every document against one per-question
/// baseline and partitions them by `pmi > pmi_threshold`. Output keeps
/// `(document, index)` order.
pub fn filter_documents(
    model: &dyn LanguageModel,
    templates: &Templates,
    question: &str,
    docs: &[(String, String)],
    config: &FilterConfig,
) -> Result<FilterOutcome> {
    config.validate()?;
    let p_base = yes_probability(model, templates, question, None, config)?;

    let mut retained = Vec::new();
    let mut dropped = Vec::new();
    for (doc_id, text) in docs {
        for mut seg in segment_document(text, doc_id) {
            let p_with = yes_probability(model, templates, question, Some(&seg), config)?;
            let score = pmi(p_with, p_base);
            seg.pmi = Some(score);
            if score > config.pmi_threshold {
                retained.push(seg);
            } else {
                dropped.push(seg);
            }
        }
    }

    let mut fallback_applied = false;
    if retained.is_empty() && !dropped.is_empty() && config.empty_fallback == EmptyFallback::KeepTopOne {
        // first segment wins ties
        let mut best = 0;
        for (i, s) in dropped.iter().enumerate() {
            if s.pmi > dropped[best].pmi {
                best = i;
            }
        }
        retained.push(dropped.remove(best));
        fallback_applied = true;
    }

    Ok(FilterOutcome {
        retained,
        dropped,
        p_base,
        fallback_applied,
    })
}
