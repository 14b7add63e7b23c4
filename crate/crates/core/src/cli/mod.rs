//! Experiment files, command dispatch and result emission for the `kotani-lab` binary.

mod commands;
mod config;
mod output;

use std::fmt;

pub use commands::run;
pub use config::{Command, ExperimentConfig, Format, Grid, OutputConfig, RunConfig};
pub use output::{ResultRecord, Table, Value};

use crate::LabError;

/// A failure with a stable machine-readable reason and a process exit code.
#[derive(Clone, Debug, PartialEq)]
pub struct CliError {
    /// 1 for validation, 2 for numerical failures.
    pub code: u8,
    pub reason: &'static str,
    pub detail: String,
}

impl CliError {
    pub fn validation(reason: &'static str, detail: impl Into<String>) -> Self {
        CliError {
            code: 1,
            reason,
            detail: detail.into(),
        }
    }

    pub fn numeric(reason: &'static str, detail: impl Into<String>) -> Self {
        CliError {
            code: 2,
            reason,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error reason={} detail={}", self.reason, self.detail)
    }
}

impl std::error::Error for CliError {}

impl From<LabError> for CliError {
    fn from(e: LabError) -> Self {
        let reason = match &e {
            LabError::InvalidModel(_) => return CliError::validation("invalid_model", e.to_string()),
            LabError::InvalidArgument(_) => return CliError::validation("invalid_argument", e.to_string()),
            LabError::SingularHop { .. } => "singular_hop",
            LabError::Range { .. } => "range",
            LabError::Scale { .. } => "scale",
            LabError::NumericBlowup { .. } => "numeric_blowup",
            LabError::Convergence { .. } => "convergence",
            LabError::Singular(_) => "singular",
            LabError::Eigen(_) => "eigensolver",
        };
        CliError::numeric(reason, e.to_string())
    }
}
