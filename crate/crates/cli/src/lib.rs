//! Library side of the `rydcirc` command: configuration, report builders
//! and serializers. The binary only parses arguments and maps errors to exit
//! codes.

pub mod config;
pub mod figures;
pub mod output;
pub mod qpt;
pub mod stirap;
pub mod table1;

use std::fmt;

use rydcirc_core::Error as CoreError;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const VALIDATION: i32 = 1;
    pub const TOLERANCE_BREACH: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}

#[derive(Debug)]
pub enum CliError {
    /// Invalid input; every problem found is listed.
    Validation(Vec<String>),
    Io(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => exit::VALIDATION,
            CliError::Numerical(_) => exit::NUMERICAL,
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Validation(vec![message.into()])
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(problems) => {
                write!(f, "invalid input:")?;
                for p in problems {
                    write!(f, "\n  - {p}")?;
                }
                Ok(())
            }
            CliError::Io(msg) => write!(f, "i/o error: {msg}"),
            CliError::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Domain(_)
            | CoreError::Dimension { .. }
            | CoreError::InvalidState(_)
            | CoreError::InvalidChain(_) => CliError::Validation(vec![e.to_string()]),
            CoreError::NotHermitian { .. }
            | CoreError::NotPsd { .. }
            | CoreError::SingularInputBasis { .. }
            | CoreError::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}
