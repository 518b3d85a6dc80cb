use std::path::Path;

use thiserror::Error;
use xfwm::ErrorKind;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{flag}: {reason}")]
    Usage { flag: String, reason: String },

    /// Rejected by the argument parser; `message` already names the flag.
    #[error("{message}")]
    Arguments { flag: String, message: String },

    #[error(transparent)]
    Model(#[from] xfwm::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl CliError {
    pub fn io(path: impl AsRef<Path>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    pub fn usage(flag: &str, reason: impl Into<String>) -> Self {
        CliError::Usage {
            flag: flag.into(),
            reason: reason.into(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage { .. } | CliError::Arguments { .. } => "config",
            CliError::Model(e) => match e.kind() {
                ErrorKind::Config => "config",
                ErrorKind::Computation => "computation",
                ErrorKind::Io => "io",
            },
            CliError::Io { .. } => "io",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind() {
            "config" => 2,
            "computation" => 3,
            _ => 4,
        }
    }

    pub fn to_json(&self) -> String {
        let mut body = serde_json::json!({
            "kind": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let CliError::Usage { flag, .. } | CliError::Arguments { flag, .. } = self {
            body["flag"] = flag.clone().into();
        }
        serde_json::json!({ "error": body }).to_string()
    }
}
