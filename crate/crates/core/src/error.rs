use thiserror::Error;

use crate::Token;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid logits: {0}")]
    InvalidLogits(String),

    #[error("invalid vocabulary: {0}")]
    InvalidVocabulary(String),

    #[error("invalid encoder output: {0}")]
    InvalidEncoder(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("incomplete table: no row for context {context:?} and feature key {key}")]
    IncompleteTable { context: Vec<Token>, key: usize },

    #[error("decode failed at frame {frame}: {message}")]
    Decode { frame: usize, message: String },

    #[error("batch mismatch: {0}")]
    BatchMismatch(String),

    #[error("lattice enumeration infeasible: {0}")]
    FeasibilityExceeded(String),

    #[error("report mismatch: {0}")]
    ReportMismatch(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Wraps a model failure with the frame the decoder was working on.
    pub(crate) fn at_frame(frame: usize) -> impl FnOnce(Error) -> Error {
        move |err| match err {
            err @ Error::Decode { .. } => err,
            other => Error::Decode {
                frame,
                message: other.to_string(),
            },
        }
    }
}
