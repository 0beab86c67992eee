use std::path::PathBuf;
use thiserror::Error;

pub type Result<T, E = EdenError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum EdenError {
    #[error("invalid configuration: {}", .0.join("; "))]
    InvalidConfig(Vec<String>),

    #[error("index out of range: {what} = {index} (limit {limit})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("input from {source_name} out of range: {detail}")]
    InputOutOfRange { source_name: String, detail: String },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed document at line {line}, column {column}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{path}: unsupported format_version {found} (expected {expected})")]
    VersionMismatch {
        path: PathBuf,
        found: u64,
        expected: u64,
    },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl EdenError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        EdenError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, err: &serde_json::Error) -> Self {
        EdenError::Malformed {
            path: path.into(),
            line: err.line(),
            column: err.column(),
            message: err.to_string(),
        }
    }
}
