use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BaseError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{0} has no density")]
    UnsupportedDensity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SourceError {
    #[error("exact digit source exhausted")]
    ExactDigitsExhausted,
    #[error("invalid digit {0:?} in exact digit string")]
    InvalidDigit(char),
    #[error("domain error: {0}")]
    Domain(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MeasureError {
    #[error("integration method mismatch: {0}")]
    MethodMismatch(String),
    #[error("integrand is not finite ({0})")]
    NonFinite(f64),
    #[error(transparent)]
    Base(#[from] BaseError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NormError {
    #[error("normalizing constant is zero")]
    ZeroMass,
    #[error("normalizing constant is infinite")]
    InfiniteMass,
    #[error(transparent)]
    Measure(#[from] MeasureError),
}
