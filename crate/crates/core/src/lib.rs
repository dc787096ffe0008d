//! Gradient-descent dynamics of a bias-free two-layer network with a single
//! ReLU output, trained against a teacher vector under ℓ1 or ℓ2
//! regularization.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! - [`model`]: Gaussian designs, activation masks, the loss and the
//!   empirical and population gradient steps.
//! - [`analytic`]: solvers for the regularized optimum, λ admissibility
//!   bounds, rank-tail probabilities and Lyapunov quantities.
//! - [`dynamics`]: discrete gradient descent, the expected flow, ball
//!   initialization and outcome classification.
//! - [`experiments`]: the convergence-ratio grid, phase fields and the
//!   four-dynamics demonstration.
//!
//! IO, file formats and the command line live in the `reluflow` crate.
#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod analytic;
pub mod dynamics;
mod error;
pub mod experiments;
pub mod linalg;
mod math;
pub mod model;
pub mod seed;

pub use error::{Error, Result};
