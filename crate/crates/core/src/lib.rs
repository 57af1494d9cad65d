//! Differentially private synthetic data on `[-1, 1]^d` that preserves smooth
//! queries, built by releasing noisy Chebyshev moments and fitting a grid
//! distribution to them.
//!
//! The pipeline is split at the privacy boundary:
//!
//! * [`synth::release`] consumes the raw dataset and returns a
//!   [`synth::PrivateRelease`] holding only noised moments and public sizes.
//! * [`synth::synthesize`] turns a release into a synthetic dataset without
//!   ever seeing the raw data.
//!
//! Supporting pieces live in [`basis`] (Chebyshev polynomials, quadrature,
//! expansions), [`grid`] (the rounding grid), [`mechanism`] (moments, noise
//! calibration), [`solver`] (the weighted simplex least-squares fit) and
//! [`utility`] (moment distances, smooth-query families and lower-bound
//! instances).

pub mod basis;
pub mod cli;
pub mod error;
pub mod grid;
pub mod mechanism;
pub mod solver;
pub mod synth;
mod tensor;
pub mod utility;

pub use error::{Error, Result};
