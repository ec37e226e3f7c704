//! Training dynamics of a single-layer classifier on high-dimensional
//! Gaussian mixtures, together with the infinite-dimensional mean-field
//! theory that predicts its learning curves.
//!
//! The crate has two halves that are meant to be cross-validated against
//! each other:
//!
//! * [`simulator`] runs finite-dimensional (stochastic) gradient descent on
//!   sampled datasets and records the empirical observables,
//! * [`dmft`] solves the self-consistent single-coordinate stochastic
//!   process that describes the same dynamics at `d -> inf`, by damped
//!   fixed-point iteration over Monte Carlo path ensembles.
//!
//! [`model`] holds the shared data model (cluster law, labels, activations,
//! loss derivatives) and [`analysis`] the closed-form observables
//! (generalization errors, oracle error) and curve comparison helpers.
//!
//! The crate is `no_std` (with `alloc`); all I/O, file formats and the
//! experiment runner live in the companion `sgflow-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod analysis;
pub mod dmft;
pub mod exec;
pub(crate) mod math;
pub mod matrix;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod simulator;

pub use metrics::MetricsSeries;
pub use model::{Activation, Dataset, LossModel, MixtureSpec};
pub use simulator::{MaskScheme, RunParams};
