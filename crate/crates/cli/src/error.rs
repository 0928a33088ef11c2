use std::path::PathBuf;

use stochcool::{BoundaryError, ModelError, OracleError, SimError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("verification failed: {failed} of {total} checks did not meet their tolerance")]
    Verification { failed: usize, total: usize },
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        Self::Config(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    /// 1 for a failed verification, 2 for anything that stops the run from starting or finishing.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Verification { .. } => 1,
            _ => 2,
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        Self::Config(e.to_string())
    }
}
