use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("text is empty after tokenization")]
    EmptyText,

    #[error("token log-probabilities are required but missing")]
    MissingLogprobs,

    #[error("token sequence has {tokens} tokens but {logprobs} log-probabilities")]
    LogprobLengthMismatch { tokens: usize, logprobs: usize },

    #[error("log-probability at position {index} is {value}, expected a finite value <= 0")]
    InvalidLogprob { index: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },

    #[error("duplicate sample id `{0}`")]
    DuplicateId(String),

    #[error("line {line}: embedding has length {actual}, repository uses {expected}")]
    InconsistentEmbeddingDim {
        line: usize,
        expected: usize,
        actual: usize,
    },

    #[error("line {line}: non-finite condition `{field}` for sample `{id}`")]
    NonFiniteFeature {
        line: usize,
        id: String,
        field: &'static str,
    },

    #[error("unsupported schema_version {found} (expected {expected})")]
    Version { found: u64, expected: u64 },

    #[error("style `{style}` has {available} samples, need at least {required}")]
    TooFewSamples {
        style: String,
        available: usize,
        required: usize,
    },

    #[error("unknown style `{0}`")]
    UnknownStyle(String),

    #[error("router index is empty")]
    EmptyIndex,

    #[error("need at least {required} reference samples, have {available}")]
    TooFewReferences { required: usize, available: usize },

    #[error("training data must contain both labels (got {positives} human / {negatives} AI)")]
    SingleClass { positives: usize, negatives: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether this error is a caller mistake (usage) rather than bad data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidArgument(_))
    }
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
