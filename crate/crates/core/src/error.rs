use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The backend could not be reached or returned a transient failure.
    #[error("backend unreachable: {0}")]
    BackendUnreachable(String),

    /// Mock backend only: the prompt has no scripted entry.
    #[error("prompt not in mock script: {fingerprint:?}")]
    PromptNotInScript { fingerprint: String },

    #[error("malformed backend response: {0}")]
    MalformedResponse(String),

    #[error("backend does not report log-probabilities")]
    LogprobsUnsupported,

    #[error("no probability information available for entropy")]
    NoProbabilityInfo,

    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("group needs at least 2 members, got {0}")]
    GroupTooSmall(usize),

    #[error("non-finite importance ratio at position {0}")]
    NonFiniteRatio(usize),

    #[error("invalid mock script at line {line}: {reason}")]
    InvalidScript { line: usize, reason: String },

    #[error("{path}:{line}: malformed record: {reason}")]
    MalformedRecord {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("input `{0}` contains no records")]
    EmptyInput(PathBuf),

    #[error("retrieval index is empty")]
    EmptyIndex,

    #[error("question id mismatch: record `{record}` vs item `{item}`")]
    IdMismatch { record: String, item: String },

    #[error("too many failures: {failed} of {total} items failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("question `{id}`: {source}")]
    Question {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn for_question(id: &str, source: Error) -> Self {
        Error::Question {
            id: id.to_string(),
            source: Box::new(source),
        }
    }

    /// Whether retrying the same request could succeed.
    pub fn is_retryable(&self) -> bool {
        match self {
            Error::BackendUnreachable(_) => true,
            Error::Question { source, .. } => source.is_retryable(),
            _ => false,
        }
    }

    /// Validation problems (bad flags, bad config values) as opposed to
    /// runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(self, Error::InvalidArgument { .. } | Error::Config(_))
    }
}
