use thiserror::Error;

/// Errors produced by the numerical laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("exponent m = {m} is not supercritical for n = {n} (requires m > m_c = {critical})")]
    SubcriticalExponent { m: f64, n: usize, critical: f64 },

    #[error("spatial dimension must be at least 1 (got {0})")]
    InvalidDimension(usize),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Barenblatt normalization failed: {0}")]
    NormalizationFailed(String),

    #[error("trajectory has no time levels")]
    EmptyTrajectory,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("Newton iteration diverged at t = {time} after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged {
        time: f64,
        iterations: usize,
        residual: f64,
    },

    #[error("negative overshoot at t = {time}: min(u) = {min:e}")]
    NegativeOvershoot { time: f64, min: f64 },

    #[error("fast-diffusion tail reached the truncation boundary at t = {time}: u = {value:e} exceeds {tolerance:e}")]
    TruncationViolation {
        time: f64,
        value: f64,
        tolerance: f64,
    },

    #[error("estimate right-hand side vanishes while the left-hand side is {lhs:e}")]
    ZeroData { lhs: f64 },

    #[error("parabolic cylinder lies outside the computed domain: {0}")]
    CylinderOutOfRange(String),

    #[error("integrability exponent q = {q} is outside the admissible range (q < {limit})")]
    ExponentOutOfRange { q: f64, limit: f64 },

    #[error("insufficient data: need at least {needed} points, have {available}")]
    InsufficientData { needed: usize, available: usize },

    #[error("sequence lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
