use std::fmt;
use std::path::Path;

use serde::Serialize;

/// A failed command: a stable `kind` for scripts plus a message.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn new(kind: &'static str, message: impl Into<String>) -> Self {
        Self { kind, message: message.into() }
    }

    pub fn io(path: &Path, e: impl fmt::Display) -> Self {
        Self::new("io", format!("{}: {e}", path.display()))
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }

    pub fn exit_code(&self) -> i32 {
        if self.kind == "usage" {
            2
        } else {
            1
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind, self.message)
    }
}

impl std::error::Error for CliError {}

macro_rules! kind_from {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                Self::new($kind, e.to_string())
            }
        })*
    };
}

kind_from! {
    mentalgen_core::ingest::IngestError => "input",
    mentalgen_core::pipeline::PipelineError => "pipeline",
    mentalgen_core::classifier::ClassifierError => "model",
    mentalgen_core::study::StudyError => "cluster",
    mentalgen_session::SessionError => "session",
    mentalgen_service::ConfigError => "config",
    mentalgen_service::StartupError => "startup",
}
