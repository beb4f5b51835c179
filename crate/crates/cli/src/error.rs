use autobid_eq::Error;
use thiserror::Error as ThisError;

/// Failures mapped onto process exit codes.
#[derive(Debug, ThisError)]
pub enum CliError {
    /// Bad input: malformed scenario, option out of range, invalid instance.
    #[error("{0}")]
    Validation(String),
    /// The solver ran but could not produce an answer.
    #[error("{0}")]
    Solver(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        Self::Validation(msg.into())
    }

    pub fn solver(msg: impl Into<String>) -> Self {
        Self::Solver(msg.into())
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Validation(_) => 2,
            Self::Solver(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::NonConvergence { .. } | Error::Divergent(_) => Self::Solver(e.to_string()),
            _ => Self::Validation(e.to_string()),
        }
    }
}
