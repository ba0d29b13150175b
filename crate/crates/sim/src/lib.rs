//! Experiment harness around `isac-core`: configuration files, checkpoint
//! files, dataset generation, training orchestration, Monte-Carlo sum-rate
//! sweeps and CSV output.

pub mod checkpoint;
pub mod config;
pub mod experiment;
pub mod gradcheck;
pub mod results;

pub use config::{ExperimentConfig, Precision, TrainingMode};
pub use experiment::{evaluate, evaluate_grid, sweep_nmse, sweep_power, train_model, TrainedModel};
pub use results::SweepResult;
