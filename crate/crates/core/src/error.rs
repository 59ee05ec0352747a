//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Precondition or argument violation.
    #[error("validation error: {0}")]
    Validation(String),

    /// Discipline with the same (case-insensitive) name already registered.
    #[error("duplicate discipline: {0}")]
    DuplicateDiscipline(String),

    /// Referenced object does not exist.
    #[error("not found: {0}")]
    NotFound(String),

    /// An entity has no cached embedding.
    #[error("embedding missing for entity {0}")]
    EmbeddingMissing(String),

    /// A file failed to parse. `offset` is the byte offset of the failure
    /// when it is known.
    #[error("format error: {message}{}", offset.map(|o| format!(" at byte {o}")).unwrap_or_default())]
    Format {
        message: String,
        offset: Option<usize>,
    },

    /// A persisted structure violates a named invariant.
    #[error("integrity error: {0}")]
    Integrity(String),

    /// A remote source is unavailable; the call may be retried.
    #[error("source unavailable: {0}")]
    SourceUnavailable(String),

    /// Provider failed after exhausting retries.
    #[error("provider error: {0}")]
    Provider(String),

    /// Non-retryable request rejection (4xx other than 429).
    #[error("request error: {0}")]
    Request(String),

    /// No structured payload could be located in model output.
    #[error("parse error: {message}; offending text: {excerpt:?}")]
    Parse { message: String, excerpt: String },

    /// A structured payload violates its schema.
    #[error("schema error on field {field:?}: {message}")]
    Schema { field: String, message: String },

    /// Structured generation yielded fewer records than requested.
    #[error("generation error: parsed {parsed} of {requested} records")]
    Generation { parsed: usize, requested: usize },

    /// Review of an idea failed after the repair retry.
    #[error("review error for idea {0}")]
    Review(String),

    /// Topic grounding produced no usable discipline.
    #[error("grounding error: {0}")]
    Grounding(String),

    /// Configuration is missing or inconsistent.
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// True when retrying the same call might succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(self, Error::SourceUnavailable(_) | Error::Provider(_))
    }
}
