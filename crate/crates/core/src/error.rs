use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("dimension mismatch in {path}: expected {expected:?}, found {found:?}")]
    Dimension {
        path: PathBuf,
        expected: (u32, u32, u32),
        found: (u32, u32, u32),
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("missing {artifact}; run `{stage}` first")]
    MissingStage { artifact: String, stage: &'static str },

    #[error("json error in {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by how the tool was invoked or configured,
    /// as opposed to problems with the data it was pointed at.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::Config(_) | Error::MissingStage { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
