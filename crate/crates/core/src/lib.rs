//! Assessing whether a trained regressor has reached the global MMSE optimum
//! by testing independence between its inputs and residuals.
//!
//! The pipeline: draw or load a [`datamodel::Dataset`], train a student from
//! [`regressors`], form residuals, estimate their mutual information with the
//! inputs over a median-split tree partition ([`partition`], [`mi`]) and
//! compare against a vanishing threshold ([`teacher`]). [`experiment`] runs
//! the seeded sweeps and Monte-Carlo error-rate studies.

pub mod datamodel;
pub mod error;
pub mod exec;
pub mod experiment;
pub mod mi;
pub mod partition;
pub mod predictor;
pub mod regressors;
pub mod rng;
pub mod teacher;

pub use error::{Error, Result};
pub use exec::Execution;
pub use predictor::Predictor;
