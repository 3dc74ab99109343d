//! Error type for the IO/CLI layer.

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] drht_core::Error),

    #[error("{context} ({path}): {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("malformed PFM header: {0}")]
    PfmHeader(String),

    #[error("truncated PFM payload: expected {expected} bytes, got {got}")]
    PfmTruncated { expected: usize, got: usize },

    #[error("PFM payload contains non-finite values")]
    PfmNonFinite,

    #[error("unsupported PPM: {0}")]
    PpmUnsupported(String),

    #[error("checkpoint integrity: {0}")]
    Checkpoint(String),

    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("evaluation: {0}")]
    Eval(String),

    #[error("{0}")]
    Invalid(String),
}

impl Error {
    pub fn io(context: &'static str, path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context,
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
