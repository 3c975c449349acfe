use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("{path}: row {row}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        /// 1-based data row (the header is row 0).
        row: usize,
        column: String,
        message: String,
    },

    #[error("{path}: missing column `{column}` in header")]
    MissingColumn { path: PathBuf, column: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: String, actual: String },

    #[error("non-finite value during training at epoch {epoch}: {what}")]
    NonFinite { epoch: usize, what: String },

    #[error("model file format version {found} is not supported (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("corrupt model file: {0}")]
    Corrupt(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn shape(expected: impl ToString, actual: impl ToString) -> Self {
        Error::Shape { expected: expected.to_string(), actual: actual.to_string() }
    }
}
