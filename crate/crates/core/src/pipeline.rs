//! The three answering modes: no retrieval, standard RAG over the top-k
//! documents, and filtered RAG that keeps only confidence-raising sentences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{filter_documents, FilterConfig, FilterOutcome, Segment};
use crate::gateway::{GenParams, LanguageModel, Prompt};
use crate::probe::QaItem;
use crate::retrieval::Retriever;
use crate::templates::Templates;

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    NoRetrieval,
    StandardRag,
    SkillRag,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::NoRetrieval, Mode::StandardRag, Mode::SkillRag];

    /// Short name used on the command line and in file names.
    pub fn slug(self) -> &'static str {
        match self {
            Mode::NoRetrieval => "none",
            Mode::StandardRag => "standard",
            Mode::SkillRag => "skill",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.slug())
    }
}

impl std::str::FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Mode::NoRetrieval),
            "standard" => Ok(Mode::StandardRag),
            "skill" => Ok(Mode::SkillRag),
            other => Err(Error::invalid(
                "mode",
                format!("expected one of none, standard, skill; got `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnswerRecord {
    pub question_id: String,
    pub mode: Mode,
    pub answer: String,
    /// Whitespace-token count of the context block.
    pub context_token_count: usize,
    /// Filtered mode only.
    pub retained_segments: Vec<Segment>,
    /// Number of sentences the filter scored (filtered mode only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub total_segments: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_base: Option<f64>,
    /// Retrieval returned nothing and the question was answered without
    /// context.
    #[serde(default)]
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentProvenance {
    pub doc_id: String,
    pub index: usize,
    pub pmi: f64,
    pub retained: bool,
}

/// Per-question filtering trace: the baseline and every scored segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterProvenance {
    pub question_id: String,
    pub p_base: f64,
    pub segments: Vec<SegmentProvenance>,
}

impl FilterProvenance {
    pub fn from_outcome(question_id: &str, outcome: &FilterOutcome) -> Self {
        let mut segments: Vec<SegmentProvenance> = outcome
            .retained
            .iter()
            .map(|s| (s, true))
            .chain(outcome.dropped.iter().map(|s| (s, false)))
            .map(|(s, retained)| SegmentProvenance {
                doc_id: s.doc_id.clone(),
                index: s.index,
                pmi: s.pmi.unwrap_or(f64::NAN),
                retained,
            })
            .collect();
        // retained and dropped are each in document order; restore the global
        // order using the first-seen position of each document
        let mut doc_order: Vec<&str> = Vec::new();
        for s in outcome.retained.iter().chain(&outcome.dropped) {
            if !doc_order.contains(&s.doc_id.as_str()) {
                doc_order.push(&s.doc_id);
            }
        }
        segments.sort_by_key(|s| {
            (
                doc_order.iter().position(|d| *d == s.doc_id).unwrap_or(usize::MAX),
                s.index,
            )
        });
        FilterProvenance {
            question_id: question_id.to_string(),
            p_base: outcome.p_base,
            segments,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Answered {
    pub record: AnswerRecord,
    pub provenance: Option<FilterProvenance>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k: usize,
    pub filter: FilterConfig,
    pub templates: Templates,
    pub max_tokens: u32,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k: DEFAULT_K,
            filter: FilterConfig::default(),
            templates: Templates::default(),
            max_tokens: 64,
        }
    }
}

pub fn whitespace_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

pub struct Pipeline<'a> {
    model: &'a dyn LanguageModel,
    retriever: &'a dyn Retriever,
    config: PipelineConfig,
}

impl<'a> Pipeline<'a> {
    pub fn new(model: &'a dyn LanguageModel, retriever: &'a dyn Retriever, config: PipelineConfig) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::invalid("k", "must be at least 1"));
        }
        config.filter.validate()?;
        Ok(Pipeline { model, retriever, config })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    fn generate(&self, prompt: String) -> Result<String> {
        let params = GenParams {
            max_tokens: self.config.max_tokens,
            ..GenParams::greedy()
        };
        let out = self.model.generate(&Prompt::new(prompt)?, &params)?;
        out.into_iter()
            .next()
            .map(|c| c.text.trim().to_string())
            .ok_or_else(|| Error::MalformedResponse("no completion returned".into()))
    }

    fn answer_with_context(&self, question: &str, context: &str) -> Result<String> {
        if context.trim().is_empty() {
            self.generate(self.config.templates.answer_prompt(question))
        } else {
            self.generate(self.config.templates.answer_with_context_prompt(question, context))
        }
    }

    fn bare_record(&self, item: &QaItem, mode: Mode) -> Result<AnswerRecord> {
        Ok(AnswerRecord {
            question_id: item.id.clone(),
            mode,
            answer: self.generate(self.config.templates.answer_prompt(&item.question))?,
            context_token_count: 0,
            retained_segments: Vec::new(),
            total_segments: None,
            p_base: None,
            fallback: false,
        })
    }

    /// One greedy answer from the question alone.
    pub fn answer_no_retrieval(&self, item: &QaItem) -> Result<AnswerRecord> {
        self.bare_record(item, Mode::NoRetrieval)
            .map_err(|e| Error::for_question(&item.id, e))
    }

    /// Answers with every top-k document in the context, in retrieval order.
    /// An empty retrieval falls back to the question alone and sets
    /// `fallback`.
    pub fn answer_standard(&self, item: &QaItem) -> Result<AnswerRecord> {
        let run = || -> Result<AnswerRecord> {
            let hits = self.retriever.retrieve(&item.question, self.config.k)?;
            if hits.is_empty() {
                let mut rec = self.bare_record(item, Mode::StandardRag)?;
                rec.fallback = true;
                return Ok(rec);
            }
            let context = hits
                .iter()
                .map(|h| h.doc.text.trim())
                .collect::<Vec<_>>()
                .join("\n");
            Ok(AnswerRecord {
                question_id: item.id.clone(),
                mode: Mode::StandardRag,
                answer: self.answer_with_context(&item.question, &context)?,
                context_token_count: whitespace_tokens(&context),
                retained_segments: Vec::new(),
                total_segments: None,
                p_base: None,
                fallback: false,
            })
        };
        run().map_err(|e| Error::for_question(&item.id, e))
    }

    /// Retrieves, filters sentences by confidence gain, and answers from the
    /// retained sentences only.
    pub fn answer_skill(&self, item: &QaItem) -> Result<Answered> {
        let run = || -> Result<Answered> {
            let hits = self.retriever.retrieve(&item.question, self.config.k)?;
            if hits.is_empty() {
                let mut rec = self.bare_record(item, Mode::SkillRag)?;
                rec.fallback = true;
                rec.total_segments = Some(0);
                return Ok(Answered { record: rec, provenance: None });
            }
            let docs: Vec<(String, String)> = hits
                .into_iter()
                .map(|h| (h.doc.doc_id, h.doc.text))
                .collect();
            let outcome = filter_documents(
                self.model,
                &self.config.templates,
                &item.question,
                &docs,
                &self.config.filter,
            )?;
            let context = outcome
                .retained
                .iter()
                .map(|s| s.text.as_str())
                .collect::<Vec<_>>()
                .join(" ");
            let answer = self.answer_with_context(&item.question, &context)?;
            let provenance = FilterProvenance::from_outcome(&item.id, &outcome);
            Ok(Answered {
                record: AnswerRecord {
                    question_id: item.id.clone(),
                    mode: Mode::SkillRag,
                    answer,
                    context_token_count: whitespace_tokens(&context),
                    total_segments: Some(outcome.total_segments()),
                    retained_segments: outcome.retained,
                    p_base: Some(outcome.p_base),
                    fallback: false,
                },
                provenance: Some(provenance),
            })
        };
        run().map_err(|e| Error::for_question(&item.id, e))
    }

    pub fn answer(&self, item: &QaItem, mode: Mode) -> Result<Answered> {
        match mode {
            Mode::NoRetrieval => self.answer_no_retrieval(item).map(|record| Answered { record, provenance: None }),
            Mode::StandardRag => self.answer_standard(item).map(|record| Answered { record, provenance: None }),
            Mode::SkillRag => self.answer_skill(item),
        }
    }
}
