//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point ({0}, {1}) is not in the group carrier")]
    NotInGroup(f64, f64),

    #[error("element does not factor through the requested subgroup pair: {0}")]
    NotDecomposable(String),

    #[error("pair is not composable: {0}")]
    NotComposable(String),

    #[error("{0}")]
    OutsideDomain(String),

    #[error("chart mismatch: expected {expected}, found {found}")]
    ChartMismatch { expected: String, found: String },

    #[error("support cannot be bounded: {0}")]
    UnboundedSupport(String),

    #[error("quadrature did not converge on [{lo}, {hi}]: error estimate {estimate:e}")]
    QuadratureNotConverged { lo: f64, hi: f64, estimate: f64 },

    #[error("deformation parameter s = {s} outside the admissible range |s| < {limit}")]
    DeformationOutOfRange { s: f64, limit: f64 },

    #[error("support meets a singular set of the structure maps: {0}")]
    SingularSupport(String),

    #[error("support is larger than the admissible region: {0}")]
    SupportTooLarge(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
