//! CLI-level errors with their process exit codes.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("I/O error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] mpinv_core::Error),
}

impl CliError {
    /// Exit code contract: 0 success, 1 usage/I/O, 2 unstable instance,
    /// 3 singular hypothesis or formula breakdown.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Parse(_) | CliError::Usage(_) => 1,
            CliError::Core(mpinv_core::Error::NotInvertible { .. }) => 3,
            CliError::Core(mpinv_core::Error::FormulaBreakdown { .. }) => 3,
            CliError::Core(mpinv_core::Error::NotStable(_)) => 2,
            CliError::Core(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
