use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite joint angle at sample {sample}")]
    NonFiniteAngle { sample: usize },

    #[error("out-of-plane component {component} is {value} rad; closed form requires sagittal-only angles")]
    NotSagittal { component: &'static str, value: f64 },

    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),

    #[error("need at least {required} samples, got {actual}")]
    TooFewSamples { required: usize, actual: usize },

    #[error("series length mismatch: {what} has {actual} samples, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("plane is nearly parallel to the shank axis (|n_s| = {0:e})")]
    DegenerateConstraint(f64),

    #[error("swing window has {0} samples, need at least 5")]
    SwingTooShort(usize),

    #[error("invalid gait events: {0}")]
    InvalidEvents(String),

    #[error("no periodicity detected in foot elevation angle (confidence {0:.3})")]
    NoPeriodicity(f64),

    #[error("no complete heel-strike to heel-strike interval")]
    NoCompleteStride,

    #[error("{path}: {message}")]
    Schema { path: PathBuf, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unit mismatch: {0}")]
    UnitMismatch(String),

    #[error("time column is not strictly increasing at row {0}")]
    NonMonotonicTime(usize),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
