//! Error type of the command-line front end and its process exit codes.

use std::fmt;

/// Failure of a command, carrying the process exit code.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    /// Process exit code.
    pub code: u8,
    /// Human-readable message.
    pub message: String,
}

impl CliError {
    /// Invalid configuration (exit code 2).
    pub const CONFIG: u8 = 2;
    /// Input/output failure (exit code 3).
    pub const IO: u8 = 3;
    /// Nothing to emit (exit code 4).
    pub const EMPTY: u8 = 4;
    /// A solver or estimator failed (exit code 5).
    pub const DIVERGENCE: u8 = 5;

    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: Self::CONFIG,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: Self::IO,
            message: message.into(),
        }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        CliError {
            code: Self::EMPTY,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<csbm_gcn::Error> for CliError {
    fn from(e: csbm_gcn::Error) -> Self {
        use csbm_gcn::Error as E;
        let code = match e {
            E::InvalidConfig(_) | E::InterpolationRegion { .. } => Self::CONFIG,
            E::SolverDiverged { .. } | E::EstimatorNoisy { .. } | E::LinearAlgebra(_) => Self::DIVERGENCE,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
