use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed WAV: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("{path}: invalid JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    /// An invariant violation found while loading annotations.
    #[error("{file}{}: {message}", record.map(|r| format!(" (record {r})")).unwrap_or_default())]
    Annotation {
        file: String,
        record: Option<usize>,
        message: String,
    },

    #[error("chew too short: {len} samples (minimum {min})")]
    ChewTooShort { len: usize, min: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("missing codebook for feature set {0}")]
    MissingCodebook(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
