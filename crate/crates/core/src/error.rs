use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed audio file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("unsupported audio encoding in {path}: {reason}")]
    Unsupported { path: PathBuf, reason: String },

    /// Invalid data; `line` is 1-based when the error comes from a text file.
    #[error("validation error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Validation { line: Option<usize>, message: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("input too short: {0}")]
    InputTooShort(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("model container: {0}")]
    Container(#[from] ContainerError),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ContainerError {
    #[error("not a model container (bad magic)")]
    BadMagic,
    #[error("unsupported container version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("file truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("malformed header: {0}")]
    Header(String),
}

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation { line: None, message: message.into() }
    }

    pub fn validation_at(line: usize, message: impl Into<String>) -> Self {
        Error::Validation { line: Some(line), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
