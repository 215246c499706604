use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("taps {taps:?} are not primitive for order {order}: period {period} instead of {expected}")]
    NonPrimitiveTaps {
        order: u32,
        taps: Vec<u32>,
        period: usize,
        expected: usize,
    },

    #[error("input signal is identically zero")]
    ZeroSignal,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("training data must contain both classes (authorized: {positives}, unauthorized: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("SMO did not converge after {iterations} iterations (violation {violation:e}, tolerance {tolerance:e})")]
    NotConverged {
        iterations: usize,
        violation: f64,
        tolerance: f64,
    },

    #[error("resonator is unstable or does not decay within {length} samples: {0}", length = .1)]
    UnstableFilter(String, usize),

    #[error("requested {requested} between-class features but only {available} pairs exist")]
    TooManyBcFeatures { requested: usize, available: usize },

    #[error("dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
