//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CapcmError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("domain mismatch: {0}")]
    DomainMismatch(String),

    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    #[error("linearization not elliptic at {count} node(s), first at node {first_node} (rho={rho:.6}, phi={phi:.6})")]
    NonElliptic {
        count: usize,
        first_node: usize,
        rho: f64,
        phi: f64,
    },

    #[error("Newton iteration failed: {0}")]
    NewtonFailure(String),

    #[error("continuation stalled: {0}")]
    ContinuationStall(String),

    #[error("convexity floor violated: min lambda_min = {min_lambda:.3e} at t = {t:.6}")]
    ConvexityLoss { min_lambda: f64, t: f64 },

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, CapcmError>;
