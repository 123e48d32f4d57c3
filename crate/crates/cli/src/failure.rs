use std::fmt;

use serde::{Deserialize, Serialize};

pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_PHYSICS: i32 = 3;
pub const EXIT_FIT: i32 = 4;
pub const EXIT_IO: i32 = 1;

/// Failure with its exit code; serialized as the diagnostic on stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CliError {
    pub exit_code: i32,
    pub kind: String,
    pub message: String,
}

impl CliError {
    pub fn new(exit_code: i32, kind: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            exit_code,
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_CONFIG, "ConfigError", message)
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self::new(EXIT_IO, "IoError", message)
    }

    /// A physics error raised while interpreting configuration values counts as
    /// a config error unless it is a stability failure.
    pub fn from_config_input(e: rydion::Error) -> Self {
        match e {
            rydion::Error::InvalidInput(m) => Self::config(m),
            other => other.into(),
        }
    }

    pub fn diagnostic(&self) -> String {
        serde_json::to_string(self)
            .unwrap_or_else(|_| format!("{{\"message\":{:?}}}", self.message))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<rydion::Error> for CliError {
    fn from(e: rydion::Error) -> Self {
        use rydion::Error as E;
        let code = match &e {
            E::FitDiverged { .. } | E::DegenerateData(_) => EXIT_FIT,
            E::InvalidInput(_) => EXIT_CONFIG,
            _ => EXIT_PHYSICS,
        };
        Self::new(code, e.kind(), e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::io(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Self::io(e.to_string())
    }
}
