//! Uniform access to text-generation backends.
//!
//! Everything that talks to a language model goes through [`LanguageModel`]:
//! sampling completions, measuring the probability of a fixed output prefix,
//! and (via [`response_entropy`]) estimating how uncertain a sampled response
//! was. Two backends ship with the crate: [`MockBackend`], driven by a
//! table of scripted prompts, and [`HttpBackend`], a client for
//! completion endpoints that report token log-probabilities.

mod http;
mod mock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{HttpBackend, HttpConfig};
pub use mock::{fingerprint, MockBackend, MockEntry, MockScript, WeightedCompletion};

/// A fully templated prompt. Never empty.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Prompt(String);

impl Prompt {
    pub fn new(text: impl Into<String>) -> Result<Self> {
        let text = text.into();
        if text.is_empty() {
            return Err(Error::invalid("prompt", "must be non-empty"));
        }
        Ok(Prompt(text))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for Prompt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogprob {
    pub token: String,
    /// Natural-log probability of `token`.
    pub logprob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub token_logprobs: Option<Vec<TokenLogprob>>,
    /// Log-probability of the whole completion, in nats. Always `<= 0`.
    pub total_logprob: f64,
    /// Mean per-token entropy in nats, when the backend reports full
    /// next-token distributions.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entropy: Option<f64>,
}

impl Completion {
    /// Builds a completion whose total log-probability is the sum of its
    /// token log-probabilities.
    pub fn from_tokens(text: impl Into<String>, tokens: Vec<TokenLogprob>) -> Self {
        let total = tokens.iter().map(|t| t.logprob).sum::<f64>();
        Completion {
            text: text.into(),
            token_logprobs: Some(tokens),
            total_logprob: total.min(0.0),
            entropy: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    /// Sampling temperature; `0` means greedy decoding.
    pub temperature: f64,
    pub max_tokens: u32,
    pub n_samples: usize,
    pub seed: Option<u64>,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            temperature: 1.0,
            max_tokens: 64,
            n_samples: 1,
            seed: None,
        }
    }
}

impl GenParams {
    /// One greedy completion.
    pub fn greedy() -> Self {
        GenParams {
            temperature: 0.0,
            ..Self::default()
        }
    }

    pub fn sampling(n_samples: usize, seed: Option<u64>) -> Self {
        GenParams {
            n_samples,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return Err(Error::invalid("temperature", "must be finite and >= 0"));
        }
        if self.max_tokens == 0 {
            return Err(Error::invalid("max_tokens", "must be positive"));
        }
        if self.n_samples == 0 {
            return Err(Error::invalid("n_samples", "must be at least 1"));
        }
        Ok(())
    }

    pub fn is_greedy(&self) -> bool {
        self.temperature == 0.0
    }
}

/// A text-generation backend.
///
/// Implementations must be safe to call from several threads at once.
pub trait LanguageModel: Send + Sync {
    /// Returns exactly `params.n_samples` completions for `prompt`.
    fn generate(&self, prompt: &Prompt, params: &GenParams) -> Result<Vec<Completion>>;

    /// Probability that the model's output for `prompt` begins with `prefix`.
    /// The result lies in `(0, 1]`.
    fn prefix_probability(&self, prompt: &Prompt, prefix: &str) -> Result<f64>;
}

impl<T: LanguageModel + ?Sized> LanguageModel for &T {
    fn generate(&self, prompt: &Prompt, params: &GenParams) -> Result<Vec<Completion>> {
        (**self).generate(prompt, params)
    }

    fn prefix_probability(&self, prompt: &Prompt, prefix: &str) -> Result<f64> {
        (**self).prefix_probability(prompt, prefix)
    }
}

impl<T: LanguageModel + ?Sized> LanguageModel for Box<T> {
    fn generate(&self, prompt: &Prompt, params: &GenParams) -> Result<Vec<Completion>> {
        (**self).generate(prompt, params)
    }

    fn prefix_probability(&self, prompt: &Prompt, prefix: &str) -> Result<f64> {
        (**self).prefix_probability(prompt, prefix)
    }
}

/// Uncertainty of a sampled response, in nats.
///
/// Uses the backend-reported mean token entropy when present. Otherwise falls
/// back to the negative mean token log-probability of the sampled sequence,
/// which needs only the returned logprobs.
pub fn response_entropy(completion: &Completion) -> Result<f64> {
    if let Some(h) = completion.entropy {
        if !(h >= 0.0 && h.is_finite()) {
            return Err(Error::MalformedResponse(format!("entropy {h} out of range")));
        }
        return Ok(h);
    }
    let tokens = match &completion.token_logprobs {
        Some(t) if !t.is_empty() => t,
        _ => return Err(Error::NoProbabilityInfo),
    };
    let mean = tokens.iter().map(|t| t.logprob).sum::<f64>() / tokens.len() as f64;
    let h = -mean;
    // all-certain tokens give -0.0
    Ok(if h <= 0.0 { 0.0 } else { h })
}

pub(crate) fn floor_probability(p: f64) -> f64 {
    if p.is_nan() {
        return f64::MIN_POSITIVE;
    }
    p.clamp(f64::MIN_POSITIVE, 1.0)
}
