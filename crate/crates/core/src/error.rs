//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by construction and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension {0}: not a nonzero power of two")]
    InvalidDimension(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("qubit count {0} outside supported range 1..=5")]
    QubitCountOutOfRange(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not unitary: {0}")]
    NotUnitary(String),

    #[error("operator is not Hermitian: {0}")]
    NotHermitian(String),

    #[error("channel is not trace-preserving: {0}")]
    NotTracePreserving(String),

    #[error("simulation integrity violated: {0}")]
    SimulationIntegrity(String),

    #[error("operator not supported on the requested irrep block: {0}")]
    UnsupportedBlock(String),

    #[error("degenerate denominator in batch {batch}: |k(1)| = {magnitude:e}")]
    DegenerateDenominator { batch: usize, magnitude: f64 },

    #[error("not enough data: {0}")]
    NotEnoughData(String),

    #[error("fit did not converge after {iterations} iterations (gradient norm {gradient:e}, residual {residual:e})")]
    FitDidNotConverge {
        iterations: usize,
        gradient: f64,
        residual: f64,
    },

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("malformed record: {0}")]
    MalformedRecord(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
