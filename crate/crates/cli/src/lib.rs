//! Front end for the SQF analysis pipeline: config resolution, command orchestration and
//! report rendering. The `sqf` binary is a thin wrapper over [`commands::run`].

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{run, Command, RunOutput};
pub use config::{Format, Overrides, RunConfig};
pub use error::{CliError, ErrorRecord};
