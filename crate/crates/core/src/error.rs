use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by corpus handling, network numerics and training.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    /// NaN or Inf surfaced in a loss or a gradient block.
    #[error("non-finite value in {what} ({context})")]
    NonFinite { what: String, context: String },

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for NaN/Inf failures; the CLI maps these to their own exit code.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
