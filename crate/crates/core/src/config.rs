//! Run settings from a flat `key = value` file, overridable per key.
//!
//! Every key has a command-line flag of the same name with `_` written as
//! `-` (`pmi_threshold` is `--pmi-threshold`). Later sources win, so the
//! intended order of application is built-in defaults, then the config
//! file, then flags.
//!
//! ```text
//! # mock backend with a fixed seed
//! backend = mock
//! script = fixtures/script.jsonl
//! seed = 7
//! k = 5
//! ```

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::filter::{EmptyFallback, FilterConfig};
use crate::gateway::{HttpBackend, HttpConfig, LanguageModel, MockBackend, MockScript};
use crate::grpo::GrpoConfig;
use crate::pipeline::{PipelineConfig, DEFAULT_K};
use crate::probe::{DEFAULT_SAMPLES, DEFAULT_THRESHOLD};

pub const CONFIG_ENV: &str = "SKILLRAG_CONFIG";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Http,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub backend: BackendKind,
    pub script: Option<PathBuf>,
    pub http: HttpConfig,
    pub n: usize,
    pub theta: f64,
    pub k: usize,
    pub grpo: GrpoConfig,
    pub filter: FilterConfig,
    pub seed: u64,
    pub jobs: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            backend: BackendKind::Mock,
            script: None,
            http: HttpConfig::default(),
            n: DEFAULT_SAMPLES,
            theta: DEFAULT_THRESHOLD,
            k: DEFAULT_K,
            grpo: GrpoConfig::default(),
            filter: FilterConfig::default(),
            seed: 0,
            jobs: 1,
        }
    }
}

/// Keys accepted by [`Config::set`].
pub const KEYS: &[&str] = &[
    "backend", "script", "endpoint", "auth_token_env", "model", "concurrency", "timeout_secs",
    "max_retries", "n", "theta", "k", "lambda", "epsilon", "beta", "group_size",
    "learning_rate", "iterations", "update_epochs", "pmi_threshold", "prob_floor",
    "yes_prefix", "fallback", "seed", "jobs",
];

fn flag(key: &str) -> String {
    format!("--{}", key.replace('_', "-"))
}

fn bad(key: &str, reason: impl std::fmt::Display) -> Error {
    Error::Config(format!("invalid value for {}: {reason}", flag(key)))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| bad(key, format!("`{value}`: {e}")))
}

fn unit(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if !(0.0..=1.0).contains(&v) {
        return Err(bad(key, format!("must be in [0, 1], got {v}")));
    }
    Ok(v)
}

fn positive_f(key: &str, value: &str) -> Result<f64> {
    let v: f64 = parse(key, value)?;
    if !(v > 0.0 && v.is_finite()) {
        return Err(bad(key, format!("must be positive, got {v}")));
    }
    Ok(v)
}

fn at_least(key: &str, value: &str, min: usize) -> Result<usize> {
    let v: usize = parse(key, value)?;
    if v < min {
        return Err(bad(key, format!("must be at least {min}, got {v}")));
    }
    Ok(v)
}

impl Config {
    /// Sets one key from its textual value, validating its range.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "backend" => {
                self.backend = match value {
                    "mock" => BackendKind::Mock,
                    "http" => BackendKind::Http,
                    other => return Err(bad(key, format!("expected mock or http, got `{other}`"))),
                }
            }
            "script" => self.script = Some(PathBuf::from(value)),
            "endpoint" => self.http.endpoint = value.to_string(),
            "auth_token_env" => self.http.auth_token_env = Some(value.to_string()),
            "model" => self.http.model = value.to_string(),
            "concurrency" => self.http.concurrency = at_least(key, value, 1)?,
            "timeout_secs" => self.http.timeout_secs = at_least(key, value, 1)? as u64,
            "max_retries" => self.http.max_retries = parse(key, value)?,
            "n" => self.n = at_least(key, value, 1)?,
            "theta" => self.theta = unit(key, value)?,
            "k" => self.k = at_least(key, value, 1)?,
            "lambda" => self.grpo.lambda = unit(key, value)?,
            "epsilon" => self.grpo.epsilon_clip = positive_f(key, value)?,
            "beta" => {
                let v: f64 = parse(key, value)?;
                if !(v >= 0.0 && v.is_finite()) {
                    return Err(bad(key, format!("must be >= 0, got {v}")));
                }
                self.grpo.beta_entropy = v;
            }
            "group_size" => self.grpo.group_size = at_least(key, value, 2)?,
            "learning_rate" => self.grpo.learning_rate = positive_f(key, value)?,
            "iterations" => self.grpo.iterations = at_least(key, value, 1)?,
            "update_epochs" => self.grpo.update_epochs = at_least(key, value, 1)?,
            "pmi_threshold" => {
                let v: f64 = parse(key, value)?;
                if !v.is_finite() {
                    return Err(bad(key, "must be finite"));
                }
                self.filter.pmi_threshold = v;
            }
            "prob_floor" => {
                let v: f64 = parse(key, value)?;
                if !(v > 0.0 && v < 1.0) {
                    return Err(bad(key, format!("must be in (0, 1), got {v}")));
                }
                self.filter.prob_floor = v;
            }
            "yes_prefix" => {
                if value.is_empty() {
                    return Err(bad(key, "must be non-empty"));
                }
                self.filter.yes_prefix = value.to_string();
            }
            "fallback" => {
                self.filter.empty_fallback = value
                    .parse::<EmptyFallback>()
                    .map_err(|_| bad(key, format!("expected no-context or keep-top-one, got `{value}`")))?
            }
            "seed" => {
                self.seed = parse(key, value)?;
                self.grpo.seed = self.seed;
            }
            "jobs" => self.jobs = at_least(key, value, 1)?,
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Applies a config file body. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", i + 1)))?;
            self.set(key.trim(), value)
                .map_err(|e| Error::Config(format!("line {}: {}", i + 1, strip_prefix(&e))))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// Applies `(key, value)` overrides in order.
    pub fn apply_overrides<'k>(&mut self, overrides: impl IntoIterator<Item = (&'k str, String)>) -> Result<()> {
        for (k, v) in overrides {
            self.set(k, &v)?;
        }
        Ok(())
    }

    pub fn pipeline_config(&self) -> PipelineConfig {
        PipelineConfig {
            k: self.k,
            filter: self.filter.clone(),
            ..PipelineConfig::default()
        }
    }

    /// Instantiates the configured backend.
    pub fn backend(&self) -> Result<Box<dyn LanguageModel>> {
        match self.backend {
            BackendKind::Mock => {
                let path = self
                    .script
                    .as_ref()
                    .ok_or_else(|| Error::Config("mock backend needs --script".into()))?;
                let script = MockScript::from_path(path)?;
                Ok(Box::new(MockBackend::new(script).with_default_seed(self.seed)))
            }
            BackendKind::Http => Ok(Box::new(HttpBackend::new(self.http.clone())?)),
        }
    }
}

fn strip_prefix(e: &Error) -> String {
    let s = e.to_string();
    s.strip_prefix("config: ").map(str::to_string).unwrap_or(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_key_is_settable() {
        let samples = [
            ("backend", "http"), ("script", "s.jsonl"), ("endpoint", "http://x"),
            ("auth_token_env", "TOKEN"), ("model", "m"), ("concurrency", "2"),
            ("timeout_secs", "5"), ("max_retries", "1"), ("n", "4"), ("theta", "0.5"),
            ("k", "3"), ("lambda", "0.3"), ("epsilon", "0.1"), ("beta", "0"),
            ("group_size", "4"), ("learning_rate", "0.1"), ("iterations", "10"),
            ("update_epochs", "2"), ("pmi_threshold", "0.1"), ("prob_floor", "1e-6"),
            ("yes_prefix", "Yes, I know"), ("fallback", "keep-top-one"), ("seed", "9"),
            ("jobs", "2"),
        ];
        assert_eq!(samples.len(), KEYS.len());
        let mut c = Config::default();
        for (k, v) in samples {
            assert!(KEYS.contains(&k));
            c.set(k, v).unwrap();
        }
        assert_eq!(c.grpo.seed, 9);
        assert_eq!(c.filter.empty_fallback, EmptyFallback::KeepTopOne);
    }

    #[test]
    fn range_errors_name_the_flag() {
        let err = Config::default().set("theta", "1.5").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("--theta") && msg.contains("[0, 1]"), "{msg}");
        assert!(Config::default().set("pmi_threshold", "x").unwrap_err().to_string().contains("--pmi-threshold"));
        assert!(Config::default().set("nope", "1").is_err());
    }

    #[test]
    fn precedence_default_file_flag() {
        let mut c = Config::default();
        assert_eq!(c.k, 5);
        c.apply_text("# comment\nk = 7\ntheta=0.6\n").unwrap();
        assert_eq!((c.k, c.theta), (7, 0.6));
        c.apply_overrides([("k", "2".to_string())]).unwrap();
        assert_eq!((c.k, c.theta), (2, 0.6));
    }

    #[test]
    fn file_errors_carry_line_numbers() {
        let err = Config::default().apply_text("k = 3\nbogus line\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn mock_backend_requires_script() {
        assert!(Config::default().backend().is_err());
    }
}
