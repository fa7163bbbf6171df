use std::fmt;

use serde::Serialize;

/// Exit code for a computational failure.
pub const EXIT_COMPUTE: i32 = 1;
/// Exit code for an invalid configuration or usage.
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Config { kind: String, message: String },
    Compute { kind: String, message: String },
}

#[derive(Serialize)]
struct ErrorJson<'a> {
    error: &'a str,
    message: &'a str,
    exit_code: i32,
}

impl CliError {
    pub fn config(kind: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            kind: kind.into(),
            message: message.into(),
        }
    }

    pub fn usage(kind: &str, message: impl Into<String>) -> Self {
        Self::config(kind, message)
    }

    pub fn io(e: std::io::Error, what: &std::path::Path) -> Self {
        CliError::Compute {
            kind: "Io".into(),
            message: format!("{}: {e}", what.display()),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Compute { .. } => EXIT_COMPUTE,
        }
    }

    pub fn kind(&self) -> &str {
        match self {
            CliError::Config { kind, .. } | CliError::Compute { kind, .. } => kind,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Config { message, .. } | CliError::Compute { message, .. } => message,
        }
    }

    /// One-line machine-readable form for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorJson {
            error: self.kind(),
            message: self.message(),
            exit_code: self.exit_code(),
        })
        .expect("plain strings serialize")
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind(), self.message())
    }
}

impl std::error::Error for CliError {}

impl From<nsl_core::Error> for CliError {
    fn from(e: nsl_core::Error) -> Self {
        let (kind, message) = (e.kind().to_string(), e.to_string());
        if e.is_config() {
            CliError::Config { kind, message }
        } else {
            CliError::Compute { kind, message }
        }
    }
}
