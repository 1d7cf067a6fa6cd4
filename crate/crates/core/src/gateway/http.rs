use std::sync::{Condvar, Mutex};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{floor_probability, Completion, GenParams, LanguageModel, Prompt, TokenLogprob};
use crate::error::{Error, Result};

/// Connection settings for a completion endpoint that speaks the
/// `POST {model, prompt, max_tokens, temperature, n, logprobs, echo}` shape
/// and answers with `choices[].text` plus `choices[].logprobs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HttpConfig {
    pub endpoint: String,
    /// Name of the environment variable holding the bearer token.
    pub auth_token_env: Option<String>,
    pub model: String,
    /// Maximum number of requests in flight at once.
    pub concurrency: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    pub backoff_base_ms: u64,
}

impl Default for HttpConfig {
    fn default() -> Self {
        HttpConfig {
            endpoint: "http://127.0.0.1:8000/v1/completions".into(),
            auth_token_env: None,
            model: "default".into(),
            concurrency: 4,
            timeout_secs: 60,
            max_retries: 3,
            backoff_base_ms: 200,
        }
    }
}

struct Limiter {
    in_flight: Mutex<usize>,
    freed: Condvar,
    max: usize,
}

struct Permit<'a>(&'a Limiter);

impl Limiter {
    fn acquire(&self) -> Permit<'_> {
        let mut n = self.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        while *n >= self.max {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n += 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        let mut n = self.0.in_flight.lock().unwrap_or_else(|e| e.into_inner());
        *n -= 1;
        self.0.freed.notify_one();
    }
}

pub struct HttpBackend {
    config: HttpConfig,
    agent: ureq::Agent,
    token: Option<String>,
    limiter: Limiter,
}

#[derive(Debug, Deserialize)]
struct CompletionResponse {
    choices: Vec<Choice>,
}

#[derive(Debug, Deserialize)]
struct Choice {
    text: Option<String>,
    logprobs: Option<ChoiceLogprobs>,
    #[serde(default)]
    entropy: Option<f64>,
}

#[derive(Debug, Deserialize)]
struct ChoiceLogprobs {
    tokens: Vec<String>,
    token_logprobs: Vec<Option<f64>>,
    #[serde(default)]
    text_offset: Option<Vec<usize>>,
}

impl HttpBackend {
    pub fn new(config: HttpConfig) -> Result<Self> {
        if config.concurrency == 0 {
            return Err(Error::invalid("concurrency", "must be at least 1"));
        }
        let token = match &config.auth_token_env {
            Some(var) => Some(std::env::var(var).map_err(|_| {
                Error::Config(format!("auth token variable {var} is not set"))
            })?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(config.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(HttpBackend {
            limiter: Limiter {
                in_flight: Mutex::new(0),
                freed: Condvar::new(),
                max: config.concurrency,
            },
            config,
            agent,
            token,
        })
    }

    pub fn config(&self) -> &HttpConfig {
        &self.config
    }

    fn post_once(&self, body: &Value) -> Result<Value> {
        let _permit = self.limiter.acquire();
        let mut req = self.agent.post(&self.config.endpoint);
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req
            .send_json(body)
            .map_err(|e| Error::BackendUnreachable(e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err(Error::BackendUnreachable(format!("HTTP {status}")));
        }
        if status >= 400 {
            return Err(Error::MalformedResponse(format!("HTTP {status}")));
        }
        resp.body_mut()
            .read_json::<Value>()
            .map_err(|e| Error::MalformedResponse(e.to_string()))
    }

    fn post(&self, body: &Value) -> Result<CompletionResponse> {
        let mut attempt = 0;
        let value = loop {
            match self.post_once(body) {
                Ok(v) => break v,
                Err(e) if e.is_retryable() && attempt < self.config.max_retries => {
                    let wait = self.config.backoff_base_ms.saturating_mul(1 << attempt);
                    thread::sleep(Duration::from_millis(wait));
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        };
        serde_json::from_value(value).map_err(|e| Error::MalformedResponse(e.to_string()))
    }
}

fn tokens_of(lp: ChoiceLogprobs) -> Result<Vec<TokenLogprob>> {
    if lp.tokens.len() != lp.token_logprobs.len() {
        return Err(Error::MalformedResponse(
            "tokens and token_logprobs differ in length".into(),
        ));
    }
    lp.tokens
        .into_iter()
        .zip(lp.token_logprobs)
        .map(|(token, logprob)| {
            let logprob = logprob
                .filter(|v| v.is_finite() && *v <= 0.0)
                .ok_or_else(|| Error::MalformedResponse(format!("bad logprob for {token:?}")))?;
            Ok(TokenLogprob { token, logprob })
        })
        .collect()
}

impl LanguageModel for HttpBackend {
    fn generate(&self, prompt: &Prompt, params: &GenParams) -> Result<Vec<Completion>> {
        params.validate()?;
        let mut body = json!({
            "model": self.config.model,
            "prompt": prompt.as_str(),
            "max_tokens": params.max_tokens,
            "temperature": params.temperature,
            "n": params.n_samples,
            "logprobs": 1,
        });
        if let Some(seed) = params.seed {
            body["seed"] = json!(seed);
        }
        let resp = self.post(&body)?;
        if resp.choices.len() != params.n_samples {
            return Err(Error::MalformedResponse(format!(
                "expected {} choices, got {}",
                params.n_samples,
                resp.choices.len()
            )));
        }
        resp.choices
            .into_iter()
            .map(|choice| {
                let text = choice
                    .text
                    .ok_or_else(|| Error::MalformedResponse("choice without text".into()))?;
                let mut completion = match choice.logprobs {
                    Some(lp) => Completion::from_tokens(text, tokens_of(lp)?),
                    None => Completion {
                        text,
                        token_logprobs: None,
                        total_logprob: 0.0,
                        entropy: None,
                    },
                };
                if let Some(h) = choice.entropy {
                    if !(h >= 0.0 && h.is_finite()) {
                        return Err(Error::MalformedResponse(format!("entropy {h}")));
                    }
                    completion.entropy = Some(h);
                }
                Ok(completion)
            })
            .collect()
    }

    /// Scores `prompt + prefix` with echo and sums the log-probabilities of
    /// every token that reaches past the end of the prompt.
    fn prefix_probability(&self, prompt: &Prompt, prefix: &str) -> Result<f64> {
        if prefix.is_empty() {
            return Err(Error::invalid("prefix", "must be non-empty"));
        }
        let full = format!("{}{}", prompt.as_str(), prefix);
        let body = json!({
            "model": self.config.model,
            "prompt": full,
            "max_tokens": 0,
            "temperature": 0.0,
            "echo": true,
            "logprobs": 0,
        });
        let resp = self.post(&body)?;
        let choice = resp
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| Error::MalformedResponse("no choices".into()))?;
        let lp = choice.logprobs.ok_or(Error::LogprobsUnsupported)?;
        let offsets = lp.text_offset.clone().ok_or(Error::LogprobsUnsupported)?;
        if offsets.len() != lp.tokens.len() || offsets.len() != lp.token_logprobs.len() {
            return Err(Error::MalformedResponse("logprob arrays differ in length".into()));
        }
        let prompt_chars = prompt.as_str().chars().count();
        let mut total = 0.0;
        let mut covered = 0;
        for ((tok, lp), off) in lp.tokens.iter().zip(&lp.token_logprobs).zip(&offsets) {
            if off + tok.chars().count() <= prompt_chars {
                continue;
            }
            let v = lp
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::MalformedResponse(format!("missing logprob for {tok:?}")))?;
            total += v;
            covered += 1;
        }
        if covered == 0 {
            return Err(Error::MalformedResponse("prefix tokens not echoed".into()));
        }
        Ok(floor_probability(total.exp()))
    }
}
