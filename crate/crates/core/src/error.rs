use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error(
        "invalid scenario: local dimension {d} and party count {parties} must both be at least 2"
    )]
    InvalidScenario { d: usize, parties: usize },

    #[error("visibility {0} outside [0, 1]")]
    VisibilityOutOfRange(f64),

    #[error("leakage probability {0} outside [0, 1]")]
    LeakageOutOfRange(f64),

    #[error("visibility {v} is at or below the separability threshold {threshold}")]
    Separable { v: f64, threshold: f64 },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid quantum state: {0}")]
    InvalidState(String),

    #[error("invalid measurement: {0}")]
    InvalidMeasurement(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid mixing parameters: {0}")]
    InvalidGamma(String),

    #[error("the unknown-flag class has zero probability")]
    DegenerateClass,

    #[error("settings space is empty")]
    EmptySettings,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
