//! Two-level nested logit estimation for crash injury severity outcomes.
//!
//! The crate covers the full workflow: preparing tabular crash records,
//! specifying a nesting tree and utilities, evaluating choice probabilities
//! and likelihoods stably, fitting by maximum likelihood with inclusive-value
//! diagnostics, and comparing segment-specific fits coefficient by coefficient.

pub mod cli;
pub mod dataprep;
pub mod estimator;
pub mod fixtures;
pub mod kernel;
pub mod model;
pub mod segment;
pub mod synth;

pub use estimator::{fit, EstimationResult, FitOptions};
pub use kernel::{choice_probabilities, gradient, log_likelihood, simulate};
pub use model::{ModelSpec, NestTree, ParameterVector};
