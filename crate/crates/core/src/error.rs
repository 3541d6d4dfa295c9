use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Everything that can go wrong while building, evaluating or persisting a model.
#[derive(Debug, Error)]
pub enum Error {
    #[error("weights must sum to 1 (got {sum})")]
    WeightSum { sum: f64 },

    #[error("weight {index} is negative ({value})")]
    NegativeWeight { index: usize, value: f64 },

    #[error("thresholds of criterion {index} must satisfy 0 <= q <= p <= v (got q={q}, p={p}, v={v})")]
    ThresholdOrder { index: usize, q: f64, p: f64, v: f64 },

    #[error("{what}: expected length {expected}, found {found}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("{what} index {index} out of range (len {len})")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("discordance exponent must be a positive integer")]
    ZeroExponent,

    #[error("invalid criteria matrix: {0}")]
    InvalidCriteria(String),

    #[error("duplicate alternative id {0:?}")]
    DuplicateId(String),

    #[error("alpha must lie in (0, 1] (got {0})")]
    AlphaOutOfRange(f64),

    #[error("step length dt must be positive (got {0})")]
    NonpositiveDt(f64),

    #[error("invalid filter: {0}")]
    InvalidFilter(String),

    #[error("step {step} is beyond the horizon {horizon}")]
    StepOutOfRange { step: usize, horizon: usize },

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("ranking is not a permutation of the alternatives: {0}")]
    NotAPermutation(String),

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{0}: file is empty")]
    EmptyFile(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by the environment (files, permissions) rather than by bad input.
    pub fn is_io(&self) -> bool {
        matches!(self, Error::Io { .. })
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
