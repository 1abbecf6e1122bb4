//! Hydropower planning models built on the `hydrosp` two-stage engine:
//! river data, scenario generation, day-ahead bidding, maintenance
//! scheduling, capacity expansion and water-value cuts.

pub mod capacity;
pub mod dayahead;
pub mod dispatch;
pub mod hydro;
pub mod maintenance;
mod physics;
pub mod scenarios;
pub mod strategy;
pub mod water_value;

use hydrosp::sp::SpError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("io error on {path}: {message}")]
    Io { path: String, message: String },
    /// The decomposition stopped before closing its gap; `log` is the iteration CSV.
    #[error("not converged after {iterations} iterations (relative gap {gap:e})")]
    NotConverged {
        iterations: usize,
        gap: f64,
        log: String,
    },
    #[error(transparent)]
    Sp(#[from] SpError),
}
