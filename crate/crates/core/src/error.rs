use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the optimization engine and its supporting modules.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid search space: {0}")]
    InvalidSpace(String),

    #[error("parameter `{name}`: {reason}")]
    InvalidValue { name: String, reason: String },

    #[error("arity mismatch: expected {expected} values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("bin index {index} out of range for parameter `{name}` with {bins} bins")]
    BinOutOfRange {
        name: String,
        index: usize,
        bins: usize,
    },

    #[error("non-finite reward {0}")]
    NonFiniteReward(f64),

    #[error("encoding error: {0}")]
    Encoding(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("tabular objective: {0}")]
    Tabular(String),

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),

    #[error("metric error: {0}")]
    Metric(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Whether the error stems from user input (configuration, spaces,
    /// files) rather than from a failing run.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::InvalidSpace(_)
                | Error::InvalidValue { .. }
                | Error::Arity { .. }
                | Error::BinOutOfRange { .. }
                | Error::Config(_)
                | Error::Tabular(_)
                | Error::FileNotFound(_)
                | Error::Parse { .. }
        )
    }

    pub(crate) fn value(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidValue {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}
