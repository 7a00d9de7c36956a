//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("dimension {0} is not a product of two equal subsystem dimensions")]
    NotBipartite(usize),

    #[error("state vector has norm {0}, expected 1")]
    NotNormalized(f64),

    #[error("channel has no Kraus operators")]
    EmptyKraus,

    #[error("Kraus operators violate the completeness relation (residual {0:.3e})")]
    NotTracePreserving(f64),

    #[error("operation requires a trace-preserving channel")]
    RequiresTracePreserving,

    #[error("probability {0} outside [0, 1]")]
    InvalidProbability(f64),

    #[error("no SIC fiducial available for dimension {0} (supported: 2, 3)")]
    NoFiducial(usize),

    #[error("MUB construction requires a prime dimension, got {0}")]
    NotPrime(usize),

    #[error("Clifford group enumeration supports dimension 2 only, got {0}")]
    UnsupportedClifford(usize),

    #[error("invalid protocol: {0}")]
    InvalidProtocol(String),

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("unknown operator label `{0}`")]
    UnknownLabel(String),

    #[error("invalid design: {0}")]
    InvalidDesign(String),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
