//! Scripted toy worlds for demos and tests.
//!
//! A [`ScriptedQuestion`] says how a mock model behaves for one question:
//! its answer distribution without context, how each retrieved sentence
//! moves `P("Yes")`, and what it answers from the full and the filtered
//! context. [`Scenario::build`] runs the real retriever and templates to
//! find every prompt the pipeline will issue and scripts them all.

use std::collections::HashMap;
use std::path::Path;

use crate::error::Result;
use crate::filter::{segment_document, FilterConfig};
use crate::gateway::{MockBackend, MockScript};
use crate::io;
use crate::probe::QaItem;
use crate::retrieval::{CorpusDoc, Retriever, TfIdfIndex};
use crate::templates::Templates;

#[derive(Debug, Clone)]
pub struct ScriptedQuestion {
    pub item: QaItem,
    /// Documents contributed to the shared corpus.
    pub docs: Vec<CorpusDoc>,
    /// `P("Yes")` for the bare self-knowledge prompt.
    pub base_yes: f64,
    /// `P("Yes")` with a given sentence as context. Unlisted sentences get
    /// `base_yes`.
    pub sentence_yes: Vec<(String, f64)>,
    /// Answer distribution for the question-only prompt. The heaviest entry
    /// is the greedy answer.
    pub bare_answers: Vec<(String, f64)>,
    pub standard_answer: String,
    pub filtered_answer: String,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub items: Vec<QaItem>,
    pub corpus: Vec<CorpusDoc>,
    pub script: MockScript,
    pub k: usize,
}

fn doc(id: &str, title: &str, text: &str) -> CorpusDoc {
    CorpusDoc {
        doc_id: id.into(),
        title: title.into(),
        text: text.into(),
    }
}

impl Scenario {
    /// Scripts every prompt the pipeline issues for `questions` at
    /// retrieval depth `k` with the default filter settings.
    pub fn build(questions: &[ScriptedQuestion], k: usize) -> Result<Self> {
        let templates = Templates::default();
        let threshold = FilterConfig::default().pmi_threshold;
        let corpus: Vec<CorpusDoc> = questions.iter().flat_map(|q| q.docs.clone()).collect();
        let index = TfIdfIndex::from_docs(corpus.clone())?;
        let mut script = MockScript::new();

        for q in questions {
            let question = &q.item.question;
            script = script
                .with_completions(
                    &templates.answer_prompt(question),
                    q.bare_answers.iter().map(|(t, w)| (t.clone(), *w)),
                )?
                .with_prefix_prob(&templates.skill_prompt(question, None), "Yes", q.base_yes)?;

            let hits = index.retrieve(question, k)?;
            if hits.is_empty() {
                continue;
            }
            let standard = hits.iter().map(|h| h.doc.text.trim()).collect::<Vec<_>>().join("\n");
            script = script.with_answer(
                &templates.answer_with_context_prompt(question, &standard),
                &q.standard_answer,
            )?;

            let gains: HashMap<&str, f64> =
                q.sentence_yes.iter().map(|(s, p)| (s.as_str(), *p)).collect();
            let mut kept = Vec::new();
            for h in &hits {
                for seg in segment_document(&h.doc.text, &h.doc.doc_id) {
                    let p = gains.get(seg.text.as_str()).copied().unwrap_or(q.base_yes);
                    script = script.with_prefix_prob(
                        &templates.skill_prompt(question, Some(&seg.text)),
                        "Yes",
                        p,
                    )?;
                    if (p / q.base_yes).ln() > threshold {
                        kept.push(seg.text);
                    }
                }
            }
            if !kept.is_empty() {
                script = script.with_answer(
                    &templates.answer_with_context_prompt(question, &kept.join(" ")),
                    &q.filtered_answer,
                )?;
            }
        }

        Ok(Scenario {
            items: questions.iter().map(|q| q.item.clone()).collect(),
            corpus,
            script,
            k,
        })
    }

    pub fn backend(&self) -> MockBackend {
        MockBackend::new(self.script.clone())
    }

    pub fn index(&self) -> Result<TfIdfIndex> {
        TfIdfIndex::from_docs(self.corpus.clone())
    }

    /// Writes `qa.jsonl`, `corpus.jsonl` and `script.jsonl` into `dir`.
    pub fn write_files(&self, dir: &Path) -> Result<()> {
        io::write_records(&dir.join("qa.jsonl"), &self.items)?;
        io::write_records(&dir.join("corpus.jsonl"), &self.corpus)?;
        io::write_atomic(&dir.join("script.jsonl"), self.script.to_lines()?.as_bytes())
    }
}

fn owned(pairs: &[(&str, f64)]) -> Vec<(String, f64)> {
    pairs.iter().map(|(s, p)| (s.to_string(), *p)).collect()
}

/// One question whose gold sentence lifts `P("Yes")` from 0.2 to 0.6 while
/// two distractor sentences leave it at 0.2 or push it down to 0.1. Noise in
/// the full context makes the model answer wrongly; the filtered context
/// holds only the gold sentence.
pub fn gold_segment_question() -> ScriptedQuestion {
    ScriptedQuestion {
        item: QaItem::new("au-capital", "What is the capital of Australia?", &["Canberra"]),
        docs: vec![
            doc("au-1", "Canberra", "Canberra is the capital city of Australia."),
            doc("au-2", "Sydney", "Sydney is the largest city in Australia."),
            doc("au-3", "Austria", "The capital of Austria is Vienna."),
        ],
        base_yes: 0.2,
        sentence_yes: owned(&[
            ("Canberra is the capital city of Australia.", 0.6),
            ("Sydney is the largest city in Australia.", 0.2),
            ("The capital of Austria is Vienna.", 0.1),
        ]),
        bare_answers: owned(&[("Sydney", 0.7), ("Canberra", 0.3)]),
        standard_answer: "Sydney".into(),
        filtered_answer: "Canberra".into(),
    }
}

pub fn gold_segment() -> Result<Scenario> {
    Scenario::build(&[gold_segment_question()], 5)
}

/// Four questions covering a helpful filter, a known answer, a partially
/// useful document, and an unanswerable question where abstaining is
/// correct.
pub fn demo_questions() -> Vec<ScriptedQuestion> {
    vec![
        gold_segment_question(),
        ScriptedQuestion {
            item: QaItem::new("pp-author", "Who wrote the novel Pride and Prejudice?", &["Jane Austen"]),
            docs: vec![
                doc(
                    "pp-1",
                    "Pride and Prejudice",
                    "Pride and Prejudice is a novel by Jane Austen. It was first published in 1813.",
                ),
                doc("pp-2", "Prejudice", "Prejudice in hiring is a topic studied by economists."),
            ],
            base_yes: 0.3,
            sentence_yes: owned(&[
                ("Pride and Prejudice is a novel by Jane Austen.", 0.8),
                ("It was first published in 1813.", 0.3),
                ("Prejudice in hiring is a topic studied by economists.", 0.25),
            ]),
            bare_answers: owned(&[("Jane Austen", 0.9), ("Charlotte Bronte", 0.1)]),
            standard_answer: "Jane Austen".into(),
            filtered_answer: "Jane Austen".into(),
        },
        ScriptedQuestion {
            item: QaItem::new(
                "water-boil",
                "At what temperature does water boil at sea level in Celsius?",
                &["100 degrees", "100"],
            ),
            docs: vec![
                doc("wb-1", "Boiling point", "Water boils at 100 degrees Celsius at sea level."),
                doc("wb-2", "Sea level rise", "Sea level is rising due to climate change."),
            ],
            base_yes: 0.5,
            sentence_yes: owned(&[
                ("Water boils at 100 degrees Celsius at sea level.", 0.9),
                ("Sea level is rising due to climate change.", 0.4),
            ]),
            bare_answers: owned(&[("100 degrees", 1.0)]),
            standard_answer: "100 degrees".into(),
            filtered_answer: "100 degrees Celsius".into(),
        },
        ScriptedQuestion {
            item: QaItem::new("market-next", "What will the stock market do next year?", &[]),
            docs: vec![doc(
                "sm-1",
                "Stock market",
                "The stock market is volatile. Analysts disagree about next year.",
            )],
            base_yes: 0.1,
            sentence_yes: owned(&[
                ("The stock market is volatile.", 0.05),
                ("Analysts disagree about next year.", 0.08),
            ]),
            bare_answers: owned(&[("No, I don't know", 0.6), ("It will rise", 0.4)]),
            standard_answer: "It will rise.".into(),
            filtered_answer: "It will rise.".into(),
        },
    ]
}

pub fn demo() -> Result<Scenario> {
    Scenario::build(&demo_questions(), 5)
}
