use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A dataset descriptor key is missing or holds an unusable value.
    #[error("format error in `{key}`: {reason}")]
    Format { key: String, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, found {actual}")]
    Dimension {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("non-finite value at snapshot {snapshot}, point {point}")]
    NonFinite { snapshot: usize, point: usize },

    #[error("region error: {0}")]
    Region(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("mode {0} has zero norm")]
    DegenerateMode(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
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

    pub(crate) fn format(key: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Format {
            key: key.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn dimension(context: impl Into<String>, expected: usize, actual: usize) -> Self {
        Error::Dimension {
            context: context.into(),
            expected,
            actual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
