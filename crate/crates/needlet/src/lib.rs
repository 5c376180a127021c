//! Needlet-kernel nonparametric regression on the sphere.
//!
//! The needlet kernel `K_n(x·x') = Σ_k η(k/n) (D_k/|S^d|) P_k^{d+1}(x·x')` is
//! a zonal polynomial kernel that is band-limited to degree < 2n and decays
//! nearly exponentially away from the diagonal. This crate builds the kernel
//! and everything needed to run regression experiments with it:
//!
//! - [`special`]: harmonic dimensions, Legendre/Gegenbauer recurrences, and
//!   the real orthonormal harmonic basis on S².
//! - [`window`]: admissible C^∞ cutoff functions η.
//! - [`spectral`]: band-limited functions stored by harmonic coefficients.
//! - [`kernel`]: the needlet kernel, Gram matrices, convolution, RKHS inner
//!   products, and localization diagnostics.
//! - [`quadrature`]: exact product rules on S², least-norm cubature weights
//!   on random nodes, and Marcinkiewicz–Zygmund / Nikolskii checks.
//! - [`simulation`]: sampling designs, Sobolev targets, and bounded noise.
//! - [`estimators`]: kernel ridge regression, the truncation operator, and
//!   l^q coefficient-regularized least squares.
//! - [`harness`]: learning curves, rate fits, λ/q sweeps, phase transitions.
//!
//! A walk-through with runnable examples lives in the `book/` directory of
//! the repository, and the `needlet` binary exposes the workflows on the
//! command line.

pub mod error;
pub mod estimators;
pub mod harness;
pub mod kernel;
pub mod quadrature;
pub mod seed;
pub mod simulation;
pub mod special;
pub mod spectral;
pub mod validate;
pub mod window;

pub use error::{Error, Result};
pub use kernel::NeedletKernel;
pub use special::SpherePoint;
pub use spectral::SpectralFunction;
pub use window::AdmissibleWindow;

/// Crate version embedded in every CLI report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
