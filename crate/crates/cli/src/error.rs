use std::fmt;

use wpnn_core::WpnnError;

/// Failure of a subcommand, carrying the process exit code.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    PartialSweep { failed: usize, total: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::PartialSweep { .. } => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::PartialSweep { failed, total } => write!(f, "{failed} of {total} sweep cells failed"),
        }
    }
}

impl From<WpnnError> for CliError {
    fn from(e: WpnnError) -> Self {
        match e {
            WpnnError::SingularResolvent(_)
            | WpnnError::EigenFailure(_)
            | WpnnError::PassivityViolation { .. }
            | WpnnError::DegenerateTarget
            | WpnnError::NonFiniteGradient { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
