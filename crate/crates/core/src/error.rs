use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("empty feature set: pass an explicit isotropic flag instead of an empty segment list")]
    EmptyFeatureSet,

    #[error("raster contains no pixel at or above threshold {threshold}")]
    NoFeaturePixels { threshold: u8 },

    #[error("bessel function of order {0} is not supported (orders 0, 1, 2 only)")]
    UnsupportedOrder(u32),

    #[error("density is not defined for the strict alignment kernel")]
    DensityUndefined,

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("{0} is outside the domain")]
    OutsideDomain(String),

    #[error("singular boundary-condition system (determinant {0:e})")]
    SingularBoundarySystem(f64),

    #[error("linear solver did not converge after {iterations} iterations (relative residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("linear solver failed: {0}")]
    Solver(String),

    #[error("non-exit suspected: walker exceeded the event cap of {cap} events")]
    EventCapExceeded { cap: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
