//! Failures of a CLI run, mapped to exit codes and a JSON error report.

use serde_json::json;

use crate::config::ConfigError;
use crate::pipeline::StageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Missing or invalid configuration, including missing input files. Exit 2.
    Config,
    /// An input file exists but does not parse. Exit 3.
    Input,
    /// A processing stage or output write failed. Exit 4.
    Stage,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub kind: ErrorKind,
    /// Config field or stage name the failure belongs to.
    pub at: String,
    pub message: String,
}

impl CliError {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, at: field.into(), message: message.into() }
    }

    pub fn input(field: &str, message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Input, at: field.into(), message: message.into() }
    }

    pub fn stage(stage: &str, message: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Stage, at: stage.into(), message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            ErrorKind::Config => 2,
            ErrorKind::Input => 3,
            ErrorKind::Stage => 4,
        }
    }

    pub fn report(&self) -> String {
        let (kind, key) = match self.kind {
            ErrorKind::Config => ("config", "field"),
            ErrorKind::Input => ("input", "field"),
            ErrorKind::Stage => ("stage", "stage"),
        };
        let body = json!({ "error": { "kind": kind, key: self.at, "message": self.message, "exit_code": self.exit_code() } });
        serde_json::to_string_pretty(&body).expect("error report serializes")
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        let at = e.field_name().unwrap_or("config").to_string();
        CliError { kind: ErrorKind::Config, at, message: e.to_string() }
    }
}

impl From<StageError> for CliError {
    fn from(e: StageError) -> Self {
        CliError::stage(e.stage(), e.to_string())
    }
}
