//! Run orchestration: configuration, initial conditions, output formats
//! and the verification experiments exposed by the command line.

pub mod config;
pub mod mms;
pub mod presets;
pub mod run;
pub mod snapshot;
pub mod trace;

use std::path::PathBuf;

use thiserror::Error;

use crate::energy::EnergyError;
use crate::equilibrium::EquilibriumError;
use crate::flow::SolverError;

pub use config::{load_config, Mode, Preset, RunConfig};
pub use run::{run_from, run_simulation, RunOptions, RunSummary};
pub use snapshot::SnapshotError;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unknown key '{key}'")]
    UnknownKey { line: usize, key: String },
    #[error("{0}")]
    Validation(String),
    #[error(transparent)]
    Snapshot(#[from] SnapshotError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Equilibrium(#[from] EquilibriumError),
    #[error(transparent)]
    Energy(#[from] EnergyError),
    #[error("step {step}: monitor check '{check}' failed ({value:.6e} > {threshold:.6e})")]
    Strict {
        step: usize,
        check: String,
        value: f64,
        threshold: f64,
    },
}

impl DriverError {
    /// Process exit code: 1 for bad input, 2 for solver failure, 3 for a
    /// monitor violation under strict mode.
    pub fn exit_code(&self) -> i32 {
        match self {
            DriverError::Solver(_) | DriverError::Equilibrium(_) => 2,
            DriverError::Strict { .. } => 3,
            _ => 1,
        }
    }
}
