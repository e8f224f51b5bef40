use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("conjugate exponent is infinite: p(x) = 1 at cell {cell}")]
    ConjugateInfinite { cell: usize },

    #[error("Sobolev exponent undefined: p+ = {p_plus} >= Q/m = {limit}")]
    SobolevExponentUndefined { p_plus: f64, limit: f64 },

    #[error("invalid exponent pair: 1/p - 1/q is not constant (spread {spread:.3e})")]
    InvalidExponentPair { spread: f64 },

    #[error("invalid weight: non-positive or non-finite value at cell {cell}")]
    InvalidWeight { cell: usize },

    #[error("ball family does not cover point at cell {cell}")]
    IncompleteFamily { cell: usize },

    #[error("maximal-operator norm estimate too small: series term {term} did not decrease")]
    NormEstimateTooSmall { term: usize },

    #[error("unsupported derivative order {0}; only 1 and 2 are implemented")]
    UnsupportedOrder(u32),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("verification gate '{gate}' failed: {detail}")]
    GateFailed { gate: String, detail: String },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
}
