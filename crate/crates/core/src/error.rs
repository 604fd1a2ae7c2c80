use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {reason}")]
    Format { what: &'static str, reason: String },

    #[error("size mismatch: expected {expected} bytes of payload, found {found}")]
    SizeMismatch { expected: usize, found: usize },

    #[error("non-finite value at index {0} of the payload")]
    NonFinitePayload(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("class {class} has {available} samples, {requested} requested for training")]
    NotEnoughSamples {
        class: u16,
        available: usize,
        requested: usize,
    },

    #[error("non-finite loss at iteration {iteration} (ce={ce}, l0={l0}, ld={ld})")]
    NonFiniteLoss {
        iteration: usize,
        ce: f64,
        l0: f64,
        ld: f64,
        batch: Vec<usize>,
    },

    #[error("config error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Format {
            what,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
