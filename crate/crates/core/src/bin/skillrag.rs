use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use skill_rag::config::{Config, CONFIG_ENV};
use skill_rag::error::{Error, Result};
use skill_rag::eval::Evaluator;
use skill_rag::filter::filter_documents;
use skill_rag::grpo::{train_toy_policy, ToyQuestion, ToyUniverse};
use skill_rag::io;
use skill_rag::pipeline::{FilterProvenance, Mode, Pipeline};
use skill_rag::probe::{load_qa, Prober};
use skill_rag::retrieval::{Retriever, TfIdfIndex};

#[derive(Parser)]
#[command(name = "skillrag", version, about = "Self-knowledge guided RAG toolkit")]
struct Cli {
    /// Flat key=value config file (overrides SKILLRAG_CONFIG).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    backend: BackendArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BackendArgs {
    /// mock or http
    #[arg(long, global = true)]
    backend: Option<String>,
    /// Mock script file.
    #[arg(long, global = true)]
    script: Option<String>,
    #[arg(long, global = true)]
    endpoint: Option<String>,
    #[arg(long, global = true)]
    model: Option<String>,
    #[arg(long = "auth-token-env", global = true)]
    auth_token_env: Option<String>,
    #[arg(long, global = true)]
    concurrency: Option<String>,
    #[arg(long = "timeout-secs", global = true)]
    timeout_secs: Option<String>,
    #[arg(long = "max-retries", global = true)]
    max_retries: Option<String>,
    #[arg(long, global = true)]
    seed: Option<String>,
    #[arg(long, global = true)]
    jobs: Option<String>,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    k: Option<String>,
    #[arg(long = "pmi-threshold")]
    pmi_threshold: Option<String>,
    /// no-context or keep-top-one
    #[arg(long)]
    fallback: Option<String>,
    #[arg(long = "prob-floor")]
    prob_floor: Option<String>,
    #[arg(long = "yes-prefix")]
    yes_prefix: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Load a corpus and report index statistics.
    Ingest {
        #[arg(long)]
        corpus: PathBuf,
    },
    /// Build a self-knowledge dataset by repeated sampling.
    Probe {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<String>,
        #[arg(long)]
        theta: Option<String>,
    },
    /// Train the toy yes/no policy and write a per-iteration trace.
    TrainToy {
        /// Line records {id, familiarity}; random universe when absent.
        #[arg(long)]
        universe: Option<PathBuf>,
        /// Size of the random universe.
        #[arg(long, default_value_t = 50)]
        questions: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        beta: Option<String>,
        #[arg(long = "group-size")]
        group_size: Option<String>,
        #[arg(long = "learning-rate")]
        learning_rate: Option<String>,
        #[arg(long)]
        iterations: Option<String>,
        #[arg(long = "update-epochs")]
        update_epochs: Option<String>,
    },
    /// Score retrieved sentences and write filter provenance records.
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Answer every question in one mode.
    Answer {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// none, standard or skill
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Evaluate one mode, or all three with `--mode all`.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "all")]
        mode: String,
        #[arg(long = "out-dir")]
        out_dir: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
}

type Overrides = Vec<(&'static str, String)>;

fn push(out: &mut Overrides, key: &'static str, value: &Option<String>) {
    if let Some(v) = value {
        out.push((key, v.clone()));
    }
}

impl BackendArgs {
    fn overrides(&self, out: &mut Overrides) {
        push(out, "backend", &self.backend);
        push(out, "script", &self.script);
        push(out, "endpoint", &self.endpoint);
        push(out, "model", &self.model);
        push(out, "auth_token_env", &self.auth_token_env);
        push(out, "concurrency", &self.concurrency);
        push(out, "timeout_secs", &self.timeout_secs);
        push(out, "max_retries", &self.max_retries);
        push(out, "seed", &self.seed);
        push(out, "jobs", &self.jobs);
    }
}

impl FilterArgs {
    fn overrides(&self, out: &mut Overrides) {
        push(out, "k", &self.k);
        push(out, "pmi_threshold", &self.pmi_threshold);
        push(out, "fallback", &self.fallback);
        push(out, "prob_floor", &self.prob_floor);
        push(out, "yes_prefix", &self.yes_prefix);
    }
}

impl Command {
    fn overrides(&self, out: &mut Overrides) {
        match self {
            Command::Ingest { .. } => {}
            Command::Probe { n, theta, .. } => {
                push(out, "n", n);
                push(out, "theta", theta);
            }
            Command::TrainToy {
                lambda,
                epsilon,
                beta,
                group_size,
                learning_rate,
                iterations,
                update_epochs,
                ..
            } => {
                push(out, "lambda", lambda);
                push(out, "epsilon", epsilon);
                push(out, "beta", beta);
                push(out, "group_size", group_size);
                push(out, "learning_rate", learning_rate);
                push(out, "iterations", iterations);
                push(out, "update_epochs", update_epochs);
            }
            Command::Filter { filter, .. }
            | Command::Answer { filter, .. }
            | Command::Eval { filter, .. } => filter.overrides(out),
        }
    }
}

fn resolve_config(cli: &Cli) -> Result<Config> {
    let mut config = Config::default();
    let file = cli
        .config
        .clone()
        .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    if let Some(path) = file {
        config.apply_file(&path)?;
    }
    let mut overrides = Overrides::new();
    cli.backend.overrides(&mut overrides);
    cli.command.overrides(&mut overrides);
    config.apply_overrides(overrides)?;
    Ok(config)
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn load_index(path: &std::path::Path) -> Result<TfIdfIndex> {
    let mut index = TfIdfIndex::new();
    index.ingest(path)?;
    Ok(index)
}

fn run(cli: Cli) -> Result<()> {
    let config = resolve_config(&cli)?;
    match &cli.command {
        Command::Ingest { corpus } => {
            let mut index = TfIdfIndex::new();
            print_json(&index.ingest(corpus)?)
        }
        Command::Probe { input, out, .. } => {
            let model = config.backend()?;
            let summary = Prober::new(model.as_ref())
                .samples(config.n)?
                .threshold(config.theta)?
                .seed(config.seed)
                .jobs(config.jobs)
                .build_dataset(input, out)?;
            print_json(&summary)
        }
        Command::TrainToy { universe, questions, out, .. } => {
            let universe = match universe {
                Some(path) => ToyUniverse::new(io::read_records::<ToyQuestion>(path)?)?,
                None => ToyUniverse::uniform(*questions, config.seed),
            };
            let result = train_toy_policy(&universe, &config.grpo)?;
            io::write_atomic(out, result.trace_tsv().as_bytes())?;
            let last = result.trace.last().map(|r| r.mean_reward).unwrap_or(0.0);
            print_json(&serde_json::json!({
                "questions": universe.questions.len(),
                "iterations": result.trace.len(),
                "final_mean_reward": last,
                "policy": universe.questions.iter().enumerate().map(|(j, q)| serde_json::json!({
                    "id": q.id,
                    "familiarity": q.familiarity,
                    "p_yes": result.policy.prob_yes(j),
                })).collect::<Vec<_>>(),
            }))
        }
        Command::Filter { input, corpus, out, .. } => {
            let model = config.backend()?;
            let index = load_index(corpus)?;
            let items = load_qa(input)?;
            let pcfg = config.pipeline_config();
            let mut records = Vec::with_capacity(items.len());
            for item in &items {
                let hits = index.retrieve(&item.question, pcfg.k)?;
                let docs: Vec<(String, String)> =
                    hits.into_iter().map(|h| (h.doc.doc_id, h.doc.text)).collect();
                let outcome = filter_documents(model.as_ref(), &pcfg.templates, &item.question, &docs, &pcfg.filter)
                    .map_err(|e| Error::Question { id: item.id.clone(), source: Box::new(e) })?;
                records.push(FilterProvenance::from_outcome(&item.id, &outcome));
            }
            io::write_records(out, &records)?;
            let retained: usize = records.iter().map(|r| r.segments.iter().filter(|s| s.retained).count()).sum();
            let total: usize = records.iter().map(|r| r.segments.len()).sum();
            print_json(&serde_json::json!({ "questions": records.len(), "segments": total, "retained": retained }))
        }
        Command::Answer { input, corpus, mode, out, .. } => {
            let mode: Mode = mode.parse()?;
            let model = config.backend()?;
            let index = load_index(corpus)?;
            let pipeline = Pipeline::new(model.as_ref(), &index, config.pipeline_config())?;
            let items = load_qa(input)?;
            let run = Evaluator::new(&pipeline)
                .jobs(config.jobs)
                .run_items(&skill_rag::eval::dataset_name(input), &items, mode)?;
            io::write_records(out, &run.records)?;
            print_json(&run.report)
        }
        Command::Eval { input, corpus, mode, out_dir, .. } => {
            let modes: Vec<Mode> = if mode == "all" {
                Mode::ALL.to_vec()
            } else {
                vec![mode.parse()?]
            };
            let model = config.backend()?;
            let index = load_index(corpus)?;
            let pipeline = Pipeline::new(model.as_ref(), &index, config.pipeline_config())?;
            let evaluator = Evaluator::new(&pipeline).jobs(config.jobs);
            let reports = if modes.len() == 3 {
                evaluator.compare_modes(input, out_dir)?
            } else {
                vec![evaluator.evaluate_run(input, modes[0], out_dir)?.report]
            };
            print!("{}", skill_rag::eval::reports_tsv(&reports));
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
