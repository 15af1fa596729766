use thiserror::Error;

/// Errors produced by the numerical routines in this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("channel has no taps")]
    EmptyTaps,
    #[error("channel taps must be finite and not all zero")]
    InvalidTaps,
    #[error("noise variance must be finite and non-negative, got {0}")]
    InvalidNoiseVariance(f64),
    #[error("layer powers must be finite and positive (layer {layer} has {power})")]
    NonPositivePower { layer: usize, power: f64 },
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("covariance matrix is not positive definite (zero noise variance needs an explicit ridge)")]
    SingularCovariance,
    #[error("noise variance is zero; the quantity is undefined")]
    ZeroNoiseVariance,
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("infeasible: {0}")]
    Infeasible(String),
}

pub type Result<T> = std::result::Result<T, Error>;
