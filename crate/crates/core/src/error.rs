use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("insufficient samples: need at least {needed}, got {available}")]
    InsufficientSamples { needed: usize, available: usize },

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("rank exhausted after selecting {selected} of {requested} candidates")]
    RankExhausted { selected: usize, requested: usize },

    #[error("degenerate target: column {column} has zero variance")]
    DegenerateTarget { column: usize },

    #[error("rank deficient design: column {column} is numerically dependent")]
    RankDeficient { column: usize },

    #[error("underdetermined fit: {samples} samples for {params} parameters")]
    Underdetermined { samples: usize, params: usize },

    #[error("free-run simulation diverged at step {step} (|y| = {value:e})")]
    Divergence { step: usize, value: f64 },

    #[error("q = {q} exceeds sample count {samples}")]
    QExceedsSamples { q: usize, samples: usize },

    #[error("empty cluster unrecoverable after {attempts} reseeding attempts")]
    EmptyClusterUnrecoverable { attempts: usize },

    #[error("rank exhausted in batch (atom {atom}, batch {batch}): {source}")]
    RankExhaustedInBatch {
        atom: usize,
        batch: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("n = {n} exceeds candidate count {candidates}")]
    NExceedsCandidates { n: usize, candidates: usize },

    #[error("non-finite state in trajectory {trajectory} at t = {time}")]
    NonFiniteState { trajectory: usize, time: f64 },

    #[error("parse error in {path} at line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("non-uniform sampling at row {row}: step {step} vs {expected}")]
    NonUniformSampling { row: usize, step: f64, expected: f64 },

    #[error("degenerate baseline: coefficient vector has zero variance")]
    DegenerateBaseline,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical pipeline (as opposed to bad input data
    /// or configuration).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::RankExhausted { .. }
                | Error::DegenerateTarget { .. }
                | Error::RankDeficient { .. }
                | Error::Underdetermined { .. }
                | Error::Divergence { .. }
                | Error::EmptyClusterUnrecoverable { .. }
                | Error::RankExhaustedInBatch { .. }
                | Error::NonFiniteState { .. }
                | Error::DegenerateBaseline
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
