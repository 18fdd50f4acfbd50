use std::process::ExitCode;

use adamlab::{
    BoundsError, CounterexampleError, ExportError, LemmaError, OcoError, SourceError, TrajectoryError,
};
use thiserror::Error;

/// Every failure maps to one stable exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// A checker found an in-scope violation, or a search hit a bound that
    /// should hold. The CSV has already been written.
    #[error("{0}")]
    Verification(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
        })
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<ExportError> for CliError {
    fn from(e: ExportError) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<SourceError> for CliError {
    fn from(e: SourceError) -> Self {
        match e {
            SourceError::Io { .. } => CliError::Io(e.to_string()),
            other => CliError::config(other),
        }
    }
}

impl From<TrajectoryError> for CliError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::Source(s) => s.into(),
            other => CliError::config(other),
        }
    }
}

impl From<BoundsError> for CliError {
    fn from(e: BoundsError) -> Self {
        CliError::config(e)
    }
}

impl From<LemmaError> for CliError {
    fn from(e: LemmaError) -> Self {
        match e {
            LemmaError::Trajectory(t) => t.into(),
            other => CliError::config(other),
        }
    }
}

impl From<CounterexampleError> for CliError {
    fn from(e: CounterexampleError) -> Self {
        match e {
            CounterexampleError::Trajectory(t) => t.into(),
            other => CliError::config(other),
        }
    }
}

impl From<OcoError> for CliError {
    fn from(e: OcoError) -> Self {
        CliError::config(e)
    }
}
