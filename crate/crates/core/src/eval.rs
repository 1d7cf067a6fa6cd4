//! Accuracy and context-efficiency reports over QA datasets.
//!
//! Accuracy uses the lexical containment match from [`crate::probe`] for
//! every dataset. Questions without gold answers count as correct only when
//! the model abstains with "No, I don't know".

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::parallel::map_ordered;
use crate::pipeline::{AnswerRecord, FilterProvenance, Mode, Pipeline};
use crate::probe::{load_qa, match_answer, too_many_failures, ProbeFailure, QaItem};
use crate::reward::is_abstention;

pub const METRIC_LABEL: &str = "lexical containment match";

pub fn score_answer(record: &AnswerRecord, item: &QaItem) -> Result<bool> {
    if record.question_id != item.id {
        return Err(Error::IdMismatch {
            record: record.question_id.clone(),
            item: item.id.clone(),
        });
    }
    if item.is_unanswerable() {
        return Ok(is_abstention(&record.answer));
    }
    Ok(match_answer(&record.answer, &item.gold_answers))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset_name: String,
    pub mode: Mode,
    pub n_questions: usize,
    pub n_errors: usize,
    pub accuracy: f64,
    pub mean_context_tokens: f64,
    /// Retained over scored segments; 1.0 for modes that do not filter.
    pub retention_ratio: f64,
}

/// Aggregates answered records. `items` must contain every record's
/// question.
pub fn summarize(
    dataset_name: &str,
    mode: Mode,
    items: &[QaItem],
    records: &[AnswerRecord],
    n_errors: usize,
) -> Result<RunReport> {
    let mut correct = 0usize;
    let mut tokens = 0usize;
    let mut retained = 0usize;
    let mut total = 0usize;
    for rec in records {
        let item = items
            .iter()
            .find(|i| i.id == rec.question_id)
            .ok_or_else(|| Error::IdMismatch {
                record: rec.question_id.clone(),
                item: "<missing>".into(),
            })?;
        if score_answer(rec, item)? {
            correct += 1;
        }
        tokens += rec.context_token_count;
        retained += rec.retained_segments.len();
        total += rec.total_segments.unwrap_or(0);
    }
    let n = records.len();
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(RunReport {
        dataset_name: dataset_name.to_string(),
        mode,
        n_questions: n,
        n_errors,
        accuracy: ratio(correct, n),
        mean_context_tokens: ratio(tokens, n),
        retention_ratio: if mode == Mode::SkillRag && total > 0 {
            retained as f64 / total as f64
        } else {
            1.0
        },
    })
}

const TSV_HEADER: &str =
    "dataset\tmode\tn_questions\tn_errors\taccuracy\tmean_context_tokens\tretention_ratio";

/// Tab-separated table, one row per report.
pub fn reports_tsv(reports: &[RunReport]) -> String {
    let mut out = format!("# accuracy: {METRIC_LABEL}\n{TSV_HEADER}\n");
    for r in reports {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.4}\t{:.2}\t{:.4}\n",
            r.dataset_name,
            r.mode,
            r.n_questions,
            r.n_errors,
            r.accuracy,
            r.mean_context_tokens,
            r.retention_ratio
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub report: RunReport,
    pub records: Vec<AnswerRecord>,
    pub provenance: Vec<FilterProvenance>,
    pub failures: Vec<ProbeFailure>,
}

/// Where a run's files go.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunFiles {
    pub records: PathBuf,
    pub provenance: Option<PathBuf>,
    pub report_tsv: PathBuf,
    pub report_jsonl: PathBuf,
}

impl RunFiles {
    pub fn new(out_dir: &Path, dataset: &str, mode: Mode) -> Self {
        let base = format!("{dataset}.{}", mode.slug());
        RunFiles {
            records: out_dir.join(format!("{base}.records.jsonl")),
            provenance: (mode == Mode::SkillRag)
                .then(|| out_dir.join(format!("{base}.provenance.jsonl"))),
            report_tsv: out_dir.join(format!("{base}.report.tsv")),
            report_jsonl: out_dir.join(format!("{base}.report.jsonl")),
        }
    }
}

pub fn dataset_name(path: &Path) -> String {
    path.file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("dataset")
        .to_string()
}

pub struct Evaluator<'a> {
    pipeline: &'a Pipeline<'a>,
    jobs: usize,
}

impl<'a> Evaluator<'a> {
    pub fn new(pipeline: &'a Pipeline<'a>) -> Self {
        Evaluator { pipeline, jobs: 1 }
    }

    pub fn jobs(mut self, jobs: usize) -> Self {
        self.jobs = jobs.max(1);
        self
    }

    /// Answers every item in `mode`. Failed questions are skipped and listed;
    /// more than 10% failures aborts.
    pub fn run_items(&self, dataset_name: &str, items: &[QaItem], mode: Mode) -> Result<RunOutput> {
        let results = map_ordered(self.jobs, items, |item| self.pipeline.answer(item, mode))?;
        let mut records = Vec::with_capacity(items.len());
        let mut provenance = Vec::new();
        let mut failures = Vec::new();
        for (item, res) in items.iter().zip(results) {
            match res {
                Ok(a) => {
                    records.push(a.record);
                    provenance.extend(a.provenance);
                }
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
        let report = summarize(dataset_name, mode, items, &records, failures.len())?;
        Ok(RunOutput {
            report,
            records,
            provenance,
            failures,
        })
    }

    /// Runs one mode over a dataset file and persists records, filter
    /// provenance (filtered mode), and the report as TSV and JSON lines.
    pub fn evaluate_run(&self, dataset_path: &Path, mode: Mode, out_dir: &Path) -> Result<RunOutput> {
        let items = load_qa(dataset_path)?;
        if items.is_empty() {
            return Err(Error::EmptyInput(dataset_path.to_path_buf()));
        }
        let name = dataset_name(dataset_path);
        let out = self.run_items(&name, &items, mode)?;
        let files = RunFiles::new(out_dir, &name, mode);
        io::write_records(&files.records, &out.records)?;
        if let Some(p) = &files.provenance {
            io::write_records(p, &out.provenance)?;
        }
        io::write_atomic(&files.report_tsv, reports_tsv(std::slice::from_ref(&out.report)).as_bytes())?;
        io::write_records(&files.report_jsonl, std::slice::from_ref(&out.report))?;
        Ok(out)
    }

    /// Runs all three modes in sequence and writes a combined table next to
    /// the per-mode files.
    pub fn compare_modes(&self, dataset_path: &Path, out_dir: &Path) -> Result<Vec<RunReport>> {
        let mut reports = Vec::with_capacity(Mode::ALL.len());
        for mode in Mode::ALL {
            reports.push(self.evaluate_run(dataset_path, mode, out_dir)?.report);
        }
        let name = dataset_name(dataset_path);
        io::write_atomic(
            &out_dir.join(format!("{name}.comparison.tsv")),
            reports_tsv(&reports).as_bytes(),
        )?;
        io::write_records(&out_dir.join(format!("{name}.comparison.jsonl")), &reports)?;
        Ok(reports)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(id: &str, answer: &str) -> AnswerRecord {
        AnswerRecord {
            question_id: id.into(),
            mode: Mode::NoRetrieval,
            answer: answer.into(),
            context_token_count: 0,
            retained_segments: vec![],
            total_segments: None,
            p_base: None,
            fallback: false,
        }
    }

    #[test]
    fn score_examples() {
        let item = QaItem::new("q", "?", &["Paris", "City of Paris"]);
        assert!(score_answer(&record("q", "Paris"), &item).unwrap());
        let item2 = QaItem::new("q", "?", &["Lutetia", "Paris"]);
        assert!(score_answer(&record("q", "paris"), &item2).unwrap());
        assert!(!score_answer(&record("q", ""), &item).unwrap());
        assert!(score_answer(&record("other", "Paris"), &item).is_err());
    }

    #[test]
    fn unanswerable_needs_abstention() {
        let item = QaItem::new("u", "?", &[]);
        assert!(score_answer(&record("u", "No, I don't know"), &item).unwrap());
        assert!(!score_answer(&record("u", "Maybe 42"), &item).unwrap());
    }

    #[test]
    fn summary_counts() {
        let items: Vec<QaItem> = (0..4).map(|i| QaItem::new(&format!("q{i}"), "?", &["yes"])).collect();
        let records: Vec<AnswerRecord> = (0..4)
            .map(|i| record(&format!("q{i}"), if i < 3 { "yes" } else { "no" }))
            .collect();
        let r = summarize("d", Mode::NoRetrieval, &items, &records, 0).unwrap();
        assert_eq!(r.accuracy, 0.75);
        assert_eq!(r.mean_context_tokens, 0.0);
        assert_eq!(r.retention_ratio, 1.0);
    }

    #[test]
    fn tsv_has_label_header_and_rows() {
        let r = RunReport {
            dataset_name: "d".into(),
            mode: Mode::SkillRag,
            n_questions: 2,
            n_errors: 0,
            accuracy: 0.5,
            mean_context_tokens: 3.0,
            retention_ratio: 1.0 / 3.0,
        };
        let tsv = reports_tsv(&[r]);
        let lines: Vec<&str> = tsv.lines().collect();
        assert!(lines[0].contains(METRIC_LABEL));
        assert_eq!(lines[2], "d\tskill\t2\t0\t0.5000\t3.00\t0.3333");
    }
}
