use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, TomoError>;

#[derive(Debug, Error)]
pub enum TomoError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("state generation failed: {0}")]
    GenerationFailure(String),

    #[error("unsupported parameter: {0}")]
    UnsupportedParameter(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl TomoError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        TomoError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        TomoError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<serde_json::Error> for TomoError {
    fn from(e: serde_json::Error) -> Self {
        TomoError::Parse(e.to_string())
    }
}

impl From<csv::Error> for TomoError {
    fn from(e: csv::Error) -> Self {
        TomoError::Parse(e.to_string())
    }
}
