use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid seed: {0}")]
    InvalidSeed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("corrupt stream file: {0}")]
    CorruptStreamFile(String),

    #[error("insufficient streams: need {needed}, have {available}")]
    InsufficientStreams { needed: usize, available: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid rate {0}: must be positive and finite")]
    InvalidRate(f64),

    #[error("invalid margins: {0}")]
    InvalidMargins(String),

    #[error("invalid table: {0}")]
    InvalidTable(String),

    #[error("invalid Matérn parameters: {0}")]
    InvalidParams(String),

    #[error("matrix in batch {batch} is not positive definite (pivot {pivot} = {value:e})")]
    NotPositiveDefinite { batch: usize, pivot: usize, value: f64 },

    #[error("invalid shapes: {0}")]
    InvalidShapes(String),

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
}
