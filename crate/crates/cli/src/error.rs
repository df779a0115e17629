use std::fmt;

use acim_core::Error;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config files or inputs; exit code 2.
    Config(String),
    /// An iteration did not converge; partial artifacts are on disk.
    /// Exit code 3.
    NotConverged(String),
    /// Any other failure; exit code 1.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::NotConverged(_) => 3,
            CliError::Failed(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::NotConverged(m) => write!(f, "not converged: {m}"),
            CliError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::UnknownMap { .. }
            | Error::InvalidMap(_)
            | Error::InvalidParameter { .. }
            | Error::InvalidGrid(_)
            | Error::DeltaTooSmall { .. }
            | Error::DimensionMismatch { .. }
            | Error::GridMismatch
            | Error::Format(_) => CliError::Config(msg),
            Error::NotConverged { .. } | Error::DensityNotConverged { .. } => CliError::NotConverged(msg),
            _ => CliError::Failed(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Failed(format!("i/o: {e}"))
    }
}
