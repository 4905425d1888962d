use serde::Serialize;
use thiserror::Error;

use asymptotics::AsymptoticsError;
use core_params::ParamError;
use series_engine::SeriesError;
use sqf_sim::SimError;

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    /// Rejected before any computation.
    #[error("{message}")]
    Config { code: String, message: String },
    #[error("{message}")]
    Numeric { code: String, message: String },
    /// Analytic and simulated values disagree; the report is still written.
    #[error("{message}")]
    Validation { message: String },
}

/// Machine-readable error record, printed as one JSON line on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ErrorRecord {
    pub code: String,
    pub kind: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl CliError {
    pub fn config(code: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Numeric { .. } => EXIT_NUMERIC,
            CliError::Validation { .. } => EXIT_VALIDATION,
        }
    }

    pub fn code(&self) -> &str {
        match self {
            CliError::Config { code, .. } | CliError::Numeric { code, .. } => code,
            CliError::Validation { .. } => "validation_failed",
        }
    }

    pub fn record(&self) -> ErrorRecord {
        ErrorRecord {
            code: self.code().to_string(),
            kind: match self {
                CliError::Config { .. } => "config",
                CliError::Numeric { .. } => "numeric",
                CliError::Validation { .. } => "validation",
            },
            message: self.to_string(),
            exit_code: self.exit_code(),
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::config(e.code(), e.to_string())
    }
}

impl From<SeriesError> for CliError {
    fn from(e: SeriesError) -> Self {
        match e {
            SeriesError::InvalidPolicy => CliError::config(e.code(), e.to_string()),
            _ => CliError::Numeric {
                code: e.code().to_string(),
                message: e.to_string(),
            },
        }
    }
}

impl From<AsymptoticsError> for CliError {
    fn from(e: AsymptoticsError) -> Self {
        match e {
            AsymptoticsError::Params(p) => p.into(),
            AsymptoticsError::Series(s) => s.into(),
            other => CliError::Numeric {
                code: other.code().to_string(),
                message: other.to_string(),
            },
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        CliError::config(e.code(), e.to_string())
    }
}
