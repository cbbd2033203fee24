use thiserror::Error;

/// Errors raised by predictors, sketches and the evaluation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("token {index}: {reason}")]
    Ingestion { index: u64, reason: String },

    #[error("expected token {expected}, got {got}")]
    Sequencing { expected: u64, got: u64 },

    #[error("not ready: {0}")]
    NotReady(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate configuration: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error("{method}, token {index}: {source}")]
    Run {
        method: String,
        index: u64,
        source: Box<Error>,
    },
}

impl Error {
    /// The underlying error with any run context stripped.
    pub fn root(&self) -> &Error {
        match self {
            Error::Run { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param(msg: impl Into<String>) -> Error {
    Error::Parameter(msg.into())
}

pub(crate) fn not_ready(msg: impl Into<String>) -> Error {
    Error::NotReady(msg.into())
}
