use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Shape(String),

    #[error("input contains non-finite values ({0})")]
    NonFinite(&'static str),

    #[error("need at least {needed} rows, got {got}")]
    TooFewRows { needed: usize, got: usize },

    #[error("ill-conditioned covariance (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("{path}: row {row}, column '{column}': {msg}")]
    Parse {
        path: String,
        row: usize,
        column: String,
        msg: String,
    },

    #[error("training data contains a single class '{0}'; nothing to learn")]
    SingleClass(String),

    #[error("unsupported model format version '{0}' (expected '{expected}')", expected = crate::forest::MODEL_FORMAT)]
    Version(String),

    #[error("malformed model file: {0}")]
    Model(String),

    #[error("fold {fold} (repeat {repeat}): {source}")]
    Fold {
        repeat: usize,
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
