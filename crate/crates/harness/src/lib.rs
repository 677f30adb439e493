//! Experiment driver: presets, runs, reports and the files they produce.

pub mod config;
pub mod error;
pub mod experiment;
pub mod report;

pub use config::{ExperimentConfig, Method, Preset, Scale};
pub use error::{HarnessError, Result};
pub use experiment::{eval_grid, run_experiment, run_with_trained, train_stage, Artifacts, Seeds};
pub use report::{coverage_metrics, emit_outputs, Coverage, ExperimentReport, Metrics, Summary};
