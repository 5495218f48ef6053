//! Batch driver: loads a complex spec and a run configuration, runs one of
//! the pipelines and writes JSON reports.

pub mod commands;
pub mod config;

use std::path::Path;

use serde::Serialize;
use torsionlab_core::Error;

pub use commands::{run, Command, Outcome};
pub use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Io(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("spec: {0}")]
    Spec(String),
    #[error("{0}")]
    Failure(String),
    #[error("{message}; largest admissible grid is N = {suggested_n}")]
    DimensionCap { message: String, suggested_n: usize },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) | CliError::Config(_) | CliError::Spec(_) => 1,
            CliError::Failure(_) => 2,
            CliError::DimensionCap { .. } => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::DimensionCap { suggested_n, .. } => CliError::DimensionCap {
                message: e.to_string(),
                suggested_n,
            },
            Error::Io(_) => CliError::Io(e.to_string()),
            Error::Json(_)
            | Error::InvalidSpec(_)
            | Error::InvalidRanks(_)
            | Error::InvalidContext(_)
            | Error::ContextMismatch(..)
            | Error::DegreeOutOfRange { .. }
            | Error::SpaceMismatch
            | Error::Unsupported(_) => CliError::Spec(e.to_string()),
            _ => CliError::Failure(e.to_string()),
        }
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let cap = Error::DimensionCap {
            dim: 10,
            cap: 5,
            suggested_n: 3,
        };
        assert_eq!(CliError::from(cap).exit_code(), 3);
        assert_eq!(CliError::from(Error::InvalidSpec("x".into())).exit_code(), 1);
        assert_eq!(CliError::from(Error::NotNilpotent(1.0)).exit_code(), 2);
    }
}
