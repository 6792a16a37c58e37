//! Experiment harness: configuration, admission events, rollouts, oracle,
//! baselines, training, evaluation, regret and file export.

pub mod config;
pub mod export;
pub mod regret;
pub mod rollout;
pub mod run;
pub mod scenario;

use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{Config, RunConfig, TrafficConfig};
pub use export::{EventRow, Policy, PolicySummary, RunSummary};
pub use rollout::{run_rollout, RolloutOutcome};
pub use run::{evaluate, train_agent, EvalOutput, EventCounts, OracleTable, Simulator, TrainOutput};
pub use scenario::{generate_scenario, AdmissionEvent};

use crate::agent::AgentError;
use crate::traffic::TrafficError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error("{filtered} of {generated} generated events were already overloaded; check the cell and traffic settings")]
    TooManyFiltered { generated: u64, filtered: u64 },
    #[error(transparent)]
    Agent(#[from] AgentError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
}

impl HarnessError {
    pub fn io(path: &Path, source: io::Error) -> Self {
        HarnessError::Io { path: path.to_path_buf(), source }
    }

    pub fn csv(path: &Path, source: csv::Error) -> Self {
        HarnessError::Csv { path: path.to_path_buf(), source }
    }
}
