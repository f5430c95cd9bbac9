//! Command-line harness around the consolidation library: snapshot I/O,
//! single-cluster runs, scaling experiments with CSV output, and SVG plots.

use std::path::PathBuf;

use thiserror::Error;

pub mod config;
pub mod experiment;
pub mod plot;
pub mod snapshot;

pub use config::RunConfig;
pub use experiment::{run_experiment, Algorithm, ExperimentSpec};

/// Harness-level failure. Wraps library errors and adds file-shaped ones.
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] dvmc_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("snapshot schema version {found} not supported (this build reads version {expected})")]
    SnapshotSchema { expected: u32, found: u32 },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| CliError::Io { path, source }
    }

    /// Process exit code category: 2 for configuration and parse problems,
    /// 3 for validation and integrity failures, 4 for runtime and I/O.
    pub fn exit_code(&self) -> u8 {
        use dvmc_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Parse { .. } => 2,
            CliError::Core(E::Config(_)) => 2,
            CliError::Core(E::Model(_) | E::Network(_) | E::InvalidMap(_)) => 3,
            CliError::SnapshotSchema { .. } => 3,
            CliError::Core(E::Infeasible { .. } | E::Generation { .. }) => 4,
            CliError::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
