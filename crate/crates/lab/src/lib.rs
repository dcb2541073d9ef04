//! Experiment runner for the catenoid stability numerics: configuration,
//! deterministic subcommands, CSV/JSON outputs and the acceptance suite.

pub mod commands;
pub mod config;
pub mod output;
pub mod suite;

use thiserror::Error;

pub use config::{ConfigError, ExperimentConfig};

#[derive(Debug, Error)]
pub enum LabError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("cannot write output: {0}")]
    Io(#[from] std::io::Error),
    #[error("{stage}: {message}")]
    Numerical { stage: String, message: String },
    #[error("{failed} of {total} acceptance criteria failed")]
    CriteriaFailed { failed: usize, total: usize },
}

impl LabError {
    pub fn numerical(stage: &str, err: impl std::fmt::Display) -> Self {
        LabError::Numerical {
            stage: stage.to_string(),
            message: err.to_string(),
        }
    }

    /// 1 for configuration and I/O problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::Io(_) => 1,
            LabError::Numerical { .. } | LabError::CriteriaFailed { .. } => 2,
        }
    }

    /// Prefixes the subcommand name to a numerical failure.
    pub fn in_subcommand(self, name: &str) -> Self {
        match self {
            LabError::Numerical { stage, message } => LabError::Numerical {
                stage: format!("{name}/{stage}"),
                message,
            },
            other => other,
        }
    }
}
