use std::fmt;

use qmet_core::QmetError;

/// Failure of a CLI run; the variant fixes the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file or output path (exit 2).
    Config(String),
    /// A numerical routine failed at a grid point (exit 3).
    Numerical { at: String, source: QmetError },
    /// A check run by the command did not hold (exit 3).
    Check(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical { .. } | CliError::Check(_) => 3,
        }
    }

    pub fn at(at: impl Into<String>, source: QmetError) -> Self {
        match source {
            QmetError::UnknownModel(_) | QmetError::InvalidParameter { .. } | QmetError::InvalidPhaseConfig { .. } => {
                CliError::Config(source.to_string())
            }
            source => CliError::Numerical { at: at.into(), source },
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Check(msg) => write!(f, "check failed: {msg}"),
            CliError::Numerical { at, source } => write!(f, "numerical failure at {at}: {source}"),
        }
    }
}

impl std::error::Error for CliError {}
