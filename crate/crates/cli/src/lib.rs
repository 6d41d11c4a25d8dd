//! Configuration parsing, CSV output and command execution for `pmelab`.

use std::path::PathBuf;

pub mod commands;
pub mod config;
pub mod output;

pub use commands::{execute, Report};
pub use config::{parse_config, serialize_config, Command, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    ConfigInvalid(Vec<String>),
    #[error("cannot read {path}: {source}")]
    ConfigRead { path: PathBuf, source: std::io::Error },
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("CSV error on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error(transparent)]
    Run(#[from] pmelab_core::Error),
}

impl CliError {
    /// 1 for validation failures, 2 for runtime failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::ConfigInvalid(_) | CliError::ConfigRead { .. } => 1,
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Run(_) => 2,
        }
    }
}
