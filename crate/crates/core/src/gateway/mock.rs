use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{floor_probability, Completion, GenParams, LanguageModel, Prompt, TokenLogprob};
use crate::error::{Error, Result};

const WEIGHT_TOLERANCE: f64 = 1e-9;

/// Key under which a prompt is looked up: the text with trailing whitespace
/// removed.
pub fn fingerprint(prompt: &str) -> &str {
    prompt.trim_end()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedCompletion {
    pub text: String,
    pub weight: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    #[serde(default)]
    pub completions: Vec<WeightedCompletion>,
    #[serde(default)]
    pub prefix_probs: BTreeMap<String, f64>,
}

impl MockEntry {
    fn validate(&self) -> std::result::Result<(), String> {
        if !self.completions.is_empty() {
            if let Some(c) = self
                .completions
                .iter()
                .find(|c| !(c.weight >= 0.0 && c.weight.is_finite()))
            {
                return Err(format!("weight {} of {:?} is invalid", c.weight, c.text));
            }
            let total: f64 = self.completions.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > WEIGHT_TOLERANCE {
                return Err(format!("completion weights sum to {total}, expected 1"));
            }
        }
        for (prefix, p) in &self.prefix_probs {
            if prefix.is_empty() {
                return Err("empty prefix".into());
            }
            if !(0.0..=1.0).contains(p) {
                return Err(format!("probability {p} for prefix {prefix:?} outside [0,1]"));
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ScriptLine {
    fingerprint: String,
    #[serde(flatten)]
    entry: MockEntry,
}

/// Scripted prompt table for [`MockBackend`].
#[derive(Debug, Clone, Default)]
pub struct MockScript {
    entries: HashMap<String, MockEntry>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    /// Parses the line format `{fingerprint, completions: [{text, weight}],
    /// prefix_probs: {prefix: p}}`.
    pub fn parse(src: &str) -> Result<Self> {
        let mut script = MockScript::new();
        for (i, line) in src.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| Error::InvalidScript { line: i + 1, reason };
            let rec: ScriptLine = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
            rec.entry.validate().map_err(bad)?;
            let key = fingerprint(&rec.fingerprint).to_string();
            if script.entries.contains_key(&key) {
                return Err(bad(format!("duplicate fingerprint {key:?}")));
            }
            script.entries.insert(key, rec.entry);
        }
        Ok(script)
    }

    /// Serializes in the line format, sorted by fingerprint.
    pub fn to_lines(&self) -> Result<String> {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            let line = ScriptLine {
                fingerprint: k.clone(),
                entry: self.entries[k].clone(),
            };
            out.push_str(&serde_json::to_string(&line)?);
            out.push('\n');
        }
        Ok(out)
    }

    fn entry_mut(&mut self, prompt: &str) -> &mut MockEntry {
        self.entries
            .entry(fingerprint(prompt).to_string())
            .or_default()
    }

    /// Sets the completion distribution for `prompt`.
    pub fn with_completions<S: Into<String>>(
        mut self,
        prompt: &str,
        completions: impl IntoIterator<Item = (S, f64)>,
    ) -> Result<Self> {
        let entry = self.entry_mut(prompt);
        entry.completions = completions
            .into_iter()
            .map(|(text, weight)| WeightedCompletion {
                text: text.into(),
                weight,
            })
            .collect();
        entry
            .validate()
            .map_err(|reason| Error::InvalidScript { line: 0, reason })?;
        Ok(self)
    }

    /// Scripts a single deterministic answer.
    pub fn with_answer(self, prompt: &str, answer: &str) -> Result<Self> {
        self.with_completions(prompt, [(answer, 1.0)])
    }

    pub fn with_prefix_prob(mut self, prompt: &str, prefix: &str, p: f64) -> Result<Self> {
        let entry = self.entry_mut(prompt);
        entry.prefix_probs.insert(prefix.to_string(), p);
        entry
            .validate()
            .map_err(|reason| Error::InvalidScript { line: 0, reason })?;
        Ok(self)
    }

    pub fn get(&self, prompt: &str) -> Option<&MockEntry> {
        self.entries.get(fingerprint(prompt))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Table-driven deterministic backend.
///
/// Each call derives its RNG stream from `(seed, prompt fingerprint)`, so the
/// backend holds no mutable state and concurrent callers see the same draws
/// they would see sequentially.
#[derive(Debug, Clone)]
pub struct MockBackend {
    script: MockScript,
    default_seed: u64,
}

impl MockBackend {
    pub fn new(script: MockScript) -> Self {
        MockBackend {
            script,
            default_seed: 0,
        }
    }

    pub fn with_default_seed(mut self, seed: u64) -> Self {
        self.default_seed = seed;
        self
    }

    pub fn script(&self) -> &MockScript {
        &self.script
    }

    fn lookup(&self, prompt: &Prompt) -> Result<&MockEntry> {
        self.script
            .get(prompt.as_str())
            .ok_or_else(|| Error::PromptNotInScript {
                fingerprint: fingerprint(prompt.as_str()).to_string(),
            })
    }
}

fn stream_seed(seed: u64, prompt: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(fingerprint(prompt).as_bytes());
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

fn scripted_completion(c: &WeightedCompletion) -> Completion {
    // the mock treats each completion as a single opaque token
    Completion::from_tokens(
        c.text.clone(),
        vec![TokenLogprob {
            token: c.text.clone(),
            logprob: c.weight.ln(),
        }],
    )
}

impl LanguageModel for MockBackend {
    fn generate(&self, prompt: &Prompt, params: &GenParams) -> Result<Vec<Completion>> {
        params.validate()?;
        let entry = self.lookup(prompt)?;
        if entry.completions.is_empty() {
            return Err(Error::PromptNotInScript {
                fingerprint: format!("{} (no completions scripted)", fingerprint(prompt.as_str())),
            });
        }

        if params.is_greedy() {
            let mut best = &entry.completions[0];
            for c in &entry.completions[1..] {
                if c.weight > best.weight {
                    best = c;
                }
            }
            return Ok(vec![scripted_completion(best); params.n_samples]);
        }

        // temperature reshapes the scripted distribution as w^(1/T)
        let inv_t = 1.0 / params.temperature;
        let weights: Vec<f64> = entry
            .completions
            .iter()
            .map(|c| if c.weight > 0.0 { c.weight.powf(inv_t) } else { 0.0 })
            .collect();
        let dist = WeightedIndex::new(&weights)
            .map_err(|e| Error::MalformedResponse(format!("mock weights: {e}")))?;
        let seed = params.seed.unwrap_or(self.default_seed);
        let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, prompt.as_str()));
        Ok((0..params.n_samples)
            .map(|_| scripted_completion(&entry.completions[dist.sample(&mut rng)]))
            .collect())
    }

    fn prefix_probability(&self, prompt: &Prompt, prefix: &str) -> Result<f64> {
        if prefix.is_empty() {
            return Err(Error::invalid("prefix", "must be non-empty"));
        }
        let entry = self.lookup(prompt)?;
        let p = match entry.prefix_probs.get(prefix) {
            Some(&p) => p,
            // unscripted prefix: mass of completions that start with it
            None => entry
                .completions
                .iter()
                .filter(|c| c.text.starts_with(prefix))
                .map(|c| c.weight)
                .sum(),
        };
        Ok(floor_probability(p))
    }
}
