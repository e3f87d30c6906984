//! Calibration functions for the quadratic surrogate of structured
//! prediction losses.
//!
//! The crate is organized bottom-up:
//!
//! - [`numerics`]: dense matrices, Jacobi SVD, pseudo-inverses and a
//!   log-barrier QP solver.
//! - [`losses`]: task loss matrices (0-1, block 0-1, Hamming, mixed, custom)
//!   and their score subspaces.
//! - [`surrogate`]: the quadratic surrogate, the `Phi_{a,b}` family, the
//!   predictor and excess-risk formulas.
//! - [`calibration`]: exact, bounded, numeric and sampled calibration
//!   functions, convex envelopes and sweeps.
//! - [`learning`]: averaged projected SGD with its complexity constants.

pub mod calibration;
pub mod error;
pub mod learning;
pub mod losses;
pub mod numerics;
pub mod surrogate;

pub use error::{Error, Result};
