//! Compensated weighted sums of fractional Brownian motion and the Euler
//! method for additive SDEs driven by fBm with `H < 1/2`.
//!
//! Modules, bottom-up:
//! - [`grid`], [`fbm`]: uniform partitions, fBm covariance calculus and exact sampling;
//! - [`constants`]: `μ(k)`, `c_H`, Hermite polynomials and the cancellation identity;
//! - [`sums`]: `h^i`, discrete integrals, compensated and Skorohod-type sums;
//! - [`sde`]: Euler scheme, reference solution, fundamental solutions, limit SDE;
//! - [`harness`], [`stats`]: Monte Carlo experiments, rate fits and distribution tests.

pub mod constants;
pub mod error;
pub mod fbm;
pub mod grid;
pub mod harness;
pub mod rng;
pub mod sde;
pub mod stats;
pub mod sums;

#[cfg(test)]
pub(crate) mod oracle;

pub use error::{Error, Result};
pub use grid::{HurstParam, StepRange, TimeGrid};
