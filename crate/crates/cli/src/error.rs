use std::path::{Path, PathBuf};

use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),

    #[error("numerical failure: {0}")]
    Numerical(#[source] unravel::Error),

    #[error("check failed: {0}")]
    CheckFailed(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) | CliError::CheckFailed(_) => 3,
            CliError::Io { .. } => 4,
        }
    }

    /// Suggested fix for numerical failures, if one is known.
    pub fn hint(&self) -> Option<&'static str> {
        let CliError::Numerical(e) = self else {
            return None;
        };
        match e.root() {
            unravel::Error::TruncationBreach { .. } => Some("raise the Fock dimension (dim)"),
            unravel::Error::StepFailure { .. } | unravel::Error::Divergence { .. } => Some("lower run.dt"),
            unravel::Error::SectionGap { .. } => Some("use a sample_every that divides the steps per period"),
            _ => None,
        }
    }
}

impl From<unravel::Error> for CliError {
    fn from(e: unravel::Error) -> Self {
        use unravel::Error as E;
        match e {
            E::Validation { field, reason } => CliError::Validation(format!("{field}: {reason}")),
            E::InvalidDimension { .. } | E::Config(_) => CliError::Validation(e.to_string()),
            other => CliError::Numerical(other),
        }
    }
}
