//! Experiment runner for the hydropower models: configuration loading,
//! command implementations and artifact writing.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::CliError;
