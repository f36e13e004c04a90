use std::fmt;

use kf_core::error::ErrorClass;

/// Front-end failure with its exit status.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numeric(String),
    Cache(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Cache(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numeric(m) => write!(f, "numeric error: {m}"),
            CliError::Cache(m) => write!(f, "cache/output error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<kf_core::Error> for CliError {
    fn from(e: kf_core::Error) -> Self {
        match e.class() {
            ErrorClass::Input => CliError::Config(e.to_string()),
            ErrorClass::Numeric => CliError::Numeric(e.to_string()),
            ErrorClass::Io => CliError::Cache(e.to_string()),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
