use std::fmt;

use swmc::{Error, IoError};

/// Failure classes, each with its own exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    /// Prefixes the message with the observation index where it happened.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            CliError::Numerical(m) => CliError::Numerical(format!("at observation {step}: {m}")),
            CliError::Data(m) => CliError::Data(format!("at observation {step}: {m}")),
            other => other,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let m = match &e {
            Error::Config(inner) => inner.clone(),
            other => other.to_string(),
        };
        match e {
            Error::Config(_) | Error::InvalidParameter(_) => CliError::Config(m),
            Error::NonPositiveGap(_) | Error::NonMonotoneTime { .. } | Error::DuplicateTimestamp { .. } | Error::DimensionMismatch { .. } => {
                CliError::Data(m)
            }
            _ => CliError::Numerical(m),
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Model(inner) => inner.into(),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(format!("i/o: {e}"))
    }
}

pub type CliResult<T = ()> = Result<T, CliError>;
