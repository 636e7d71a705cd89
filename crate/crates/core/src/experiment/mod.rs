//! Seeded sweeps over training sizes: each (size, seed) cell trains a
//! student, evaluates it on a validation set fixed per seed, and the cells
//! are aggregated into median/IQR curves.

mod config;
mod emit;
mod run;

pub use config::{log_grid, ExperimentConfig, Metric, Scenario};
pub use emit::{emit, parse_curves, render, Format};
pub use run::{
    aggregate, quantile, run_experiment, CellOutcome, CellRecord, CurvePoint, ExperimentCurve,
    ExperimentOutput, Head, Pipeline,
};
