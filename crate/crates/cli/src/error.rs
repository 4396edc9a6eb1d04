use std::path::Path;

use serde::Serialize;

/// A failure reported to the user as one line of JSON on stderr.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self {
            kind,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config", message)
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage", message)
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("io", format!("{}: {err}", path.display()))
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(&serde_json::json!({ "error": self }))
            .expect("plain strings serialize")
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<miae_core::Error> for CliError {
    fn from(e: miae_core::Error) -> Self {
        use miae_core::Error as E;
        let kind = match &e {
            E::InvalidDimension(_) => "invalid_dimension",
            E::InvalidConfig(_) => "config",
            E::EmptyInput(_) => "empty_input",
            E::NonFinite(_) => "non_finite",
            E::Diverged { .. } => "diverged",
            E::Ingestion { .. } => "ingestion",
            E::Stratification(_) => "stratification",
            E::UndefinedMetric(_) => "undefined_metric",
            E::UndefinedQuality { .. } => "undefined_quality",
            E::ModelFormat { .. } => "model_format",
            E::Io(_) => "io",
            E::Csv(_) => "csv",
        };
        Self::new(kind, e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Self::new("csv", e.to_string())
    }
}
