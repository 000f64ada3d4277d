//! Config-driven experiment runner for spreadbound.

pub mod config;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, SystemSpec};
pub use runner::{compute, run_experiment, RunError, RunOptions, RunOutcome};
