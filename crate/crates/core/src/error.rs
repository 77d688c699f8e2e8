use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MrlError {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("pole on the unit circle at omega = {omega}")]
    PoleOnCircle { omega: f64 },
    #[error("parameters are not convergent (rate = {rate})")]
    Divergent { rate: f64 },
    #[error("hessian not available for this oracle")]
    NoHessian,
    #[error("cost guard: {0}")]
    CostGuard(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
}

pub type Result<T> = std::result::Result<T, MrlError>;
