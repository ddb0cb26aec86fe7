//! Finite-sample location estimation by smoothed maximum likelihood.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: translation families `f(x - λ)` with exact samplers, quantiles
//!   and covariances, plus the textual model grammar.
//! - [`smoothing`]: the `r`-smoothed density `f_r = f * N(0, r²)`, its score and
//!   Fisher information, and numerical diagnostics of their analytic properties.
//! - [`estimator1d`] / [`estimatorhd`]: the one-step Newton estimators on the
//!   smoothed score, in one and many dimensions.
//! - [`concentration`]: norm tail bounds for subgamma random vectors and the
//!   Monte Carlo machinery that checks them.

pub mod concentration;
pub mod error;
pub mod estimator1d;
pub mod estimatorhd;
pub mod linalg;
pub mod model;
pub mod quadrature;
pub mod rng;
pub mod smoothing;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Density1d, DensityHd, Family, ModelSpec};
pub use rng::RngSeed;
pub use smoothing::{FisherMatrix, SmoothedModel1d, SmoothedModelHd};
