//! Error types shared across the crate.

use thiserror::Error;

/// Errors produced by kernel, quadrature, and estimator operations.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An operation was invoked for a sphere dimension it does not support.
    #[error("unsupported dimension d={d}: {context}")]
    UnsupportedDimension { d: usize, context: &'static str },

    /// A point failed the unit-norm invariant.
    #[error("point is not on the unit sphere: |norm - 1| = {deviation:.3e}")]
    NotUnitNorm { deviation: f64 },

    /// The moment system for cubature weights is rank deficient.
    #[error("degenerate point configuration: moment system has rank {rank}, need {required}")]
    DegenerateConfiguration { rank: usize, required: usize },

    /// A spectral function carries mass at a degree where the kernel window vanishes.
    #[error("degenerate degree {degree}: window vanishes there, RKHS weight undefined")]
    DegenerateDegree { degree: usize },

    /// A quadrature rule is not exact enough for the requested integral.
    #[error("insufficient quadrature degree: rule is exact to {available}, need {required}")]
    InsufficientQuadrature { available: usize, required: usize },

    /// A sampling design has vanishing density somewhere, so its distortion is infinite.
    #[error("sampling design has density infimum zero: distortion is infinite")]
    InfiniteDistortion,

    /// Not enough data to carry out a statistical fit.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// An experiment configuration violates its invariants.
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;
