use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed image bytes. `offset` is the byte position where decoding failed.
    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("expected {expected} frame, got {actual}")]
    ColorSpace { expected: &'static str, actual: &'static str },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("training failed: {0}")]
    Training(String),

    /// Persisted artifact (model, report, dump, config) could not be parsed.
    #[error("format error: {0}")]
    Format(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn decode(offset: usize, message: impl Into<String>) -> Self {
        Error::Decode { offset, message: message.into() }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Format(e.to_string())
    }
}
