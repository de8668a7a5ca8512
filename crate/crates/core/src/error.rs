use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("reaction counts are all zero; distribution is undefined")]
    DegenerateDistribution,

    #[error("invalid split fractions: {0}")]
    InvalidFractions(String),

    #[error("corpus of {size} posts is too small for a three-way split")]
    CorpusTooSmall { size: usize },

    #[error("unknown emotion label `{0}`")]
    UnknownEmotion(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("target is not a distribution (sum {sum}, min {min})")]
    OffSimplex { sum: f64, min: f64 },

    #[error("normal equations are singular even with ridge {ridge}")]
    RankDeficient { ridge: f64 },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
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

pub type Result<T, E = Error> = std::result::Result<T, E>;
