//! Experiment runner: dataset preparation, teacher training, distillation,
//! evaluation, profiling and efficiency reports.

pub mod cli;
pub mod commands;
pub mod config;
pub mod dataset;

use std::path::Path;

use patchecho::checkpoint::CheckpointError;
use patchecho::data::DataError;
use patchecho::distill::DistillError;
use patchecho::energy::EnergyError;
use patchecho::models::ModelError;
use serde::Serialize;
use thiserror::Error;

pub use cli::{run, Cli};

/// Process exit status for a failed command.
pub mod exit {
    pub const OK: i32 = 0;
    pub const OTHER: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERIC: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => exit::CONFIG,
            Self::Numeric(_) => exit::NUMERIC,
            Self::Other(_) => exit::OTHER,
        }
    }

    pub(crate) fn io(path: &Path, e: std::io::Error) -> Self {
        Self::Other(format!("{}: {e}", path.display()))
    }
}

impl From<DistillError> for CliError {
    fn from(e: DistillError) -> Self {
        match e {
            DistillError::Config(_) => Self::Config(e.to_string()),
            DistillError::NonFinite { .. } | DistillError::Invariant(_) => Self::Numeric(e.to_string()),
            _ => Self::Other(e.to_string()),
        }
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        match e {
            EnergyError::Contract(_) => Self::Other(e.to_string()),
            _ => Self::Config(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Config(e.to_string())
    }
}

macro_rules! other_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::Other(e.to_string())
            }
        }
    )*};
}
other_from!(DataError, CheckpointError);

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Other(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::io(path, e))
}
