use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("ingestion failed: {count} malformed rows out of {total} (first rows: {rows:?})")]
    Malformed {
        count: usize,
        total: usize,
        rows: Vec<usize>,
    },

    #[error("bad header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("non-finite loss at local step {step}")]
    NonFiniteLoss { step: usize },

    #[error("empty aggregation at episode {episode}: every submitted model was flagged")]
    EmptyAggregation { episode: usize },

    #[error("privacy ledger already stopped")]
    LedgerStopped,

    #[error("non-finite Q value at training episode {episode}")]
    NonFiniteQ { episode: usize },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name,
            reason: reason.into(),
        }
    }
}
