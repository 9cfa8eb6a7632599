//! Inverse problems for PDEs with time- and space-varying coefficients.
//!
//! The crate has four layers:
//!
//! * [`net`] — small dense networks with forward-propagated 2-jets
//!   (value, first and pure second partials) and exact reverse-mode
//!   parameter gradients.
//! * [`forward`] — data generation: a pseudo-spectral solver for the
//!   time-varying Burgers' equation, a finite-difference solver for the
//!   2D acoustic wave equation with a free surface, and analytic
//!   references.
//! * [`inverse`] — the constrained self-adaptive physics-informed
//!   training engine: residual/data losses, per-point adaptive weights,
//!   Adam and L-BFGS, and the staged wave-inversion recipe.
//! * [`changepoint`] — Gaussian-mixture soft classification of inferred
//!   coefficient traces/fields, change-point probabilities, and a CUSUM
//!   baseline.
//!
//! [`harness`] ties the layers into reproducible end-to-end experiment
//! runs behind the `varicoef` CLI.

pub mod changepoint;
pub mod error;
pub mod forward;
pub mod harness;
pub mod inverse;
pub mod net;
pub mod rng;

pub use error::{Error, Result};
