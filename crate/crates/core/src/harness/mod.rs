//! Experiment plumbing: seeded instance generation, solver benchmarks and
//! Monte Carlo checks of the decomposition's loss bounds.

pub mod bench;
pub mod generate;
pub mod lemmas;
pub mod rng;

use thiserror::Error;

use crate::error::SolveError;
use crate::instance::InstanceError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
