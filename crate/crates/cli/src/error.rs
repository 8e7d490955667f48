use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{message}")]
    Domain { kind: &'static str, message: String },
}

impl CliError {
    pub fn domain(kind: &'static str, message: impl std::fmt::Display) -> Self {
        CliError::Domain {
            kind,
            message: message.to_string(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain { .. } => 1,
        }
    }

    /// The single-line JSON written to stderr.
    pub fn to_json_line(&self) -> String {
        let kind = match self {
            CliError::Usage(_) => "usage",
            CliError::Domain { kind, .. } => kind,
        };
        json!({ "error": { "kind": kind, "message": self.to_string() } }).to_string()
    }
}

impl From<clap::Error> for CliError {
    fn from(e: clap::Error) -> Self {
        CliError::Usage(e.render().to_string().trim().to_string())
    }
}

macro_rules! domain_from {
    ($($ty:ty => $kind:literal),* $(,)?) => {
        $(impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::domain($kind, e)
            }
        })*
    };
}

domain_from! {
    std::io::Error => "io",
    serde_json::Error => "json",
    reqwest::Error => "http",
    sevbench::error::ModelError => "model",
    sevbench::error::EmbeddingError => "embedding",
    sevbench::error::CoresetError => "coreset",
    sevbench::error::SeverityError => "severity",
    sevbench::error::EstimationError => "estimation",
    sevbench::error::BenchmarkError => "benchmark",
    sevbench::synth::SynthError => "synth",
    sevbench_service::ServiceError => "service",
}
