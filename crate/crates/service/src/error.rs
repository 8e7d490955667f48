use std::io;

use sevbench::error::SeverityError;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown {kind} `{id}`")]
    NotFound { kind: &'static str, id: String },
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("lease on {0} expired; the task was re-opened")]
    LeaseExpired(String),
    #[error("{0}")]
    Forbidden(String),
    #[error(transparent)]
    Severity(#[from] SeverityError),
    #[error("event log line {line}: {reason}")]
    CorruptLog { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl ServiceError {
    pub fn kind(&self) -> &'static str {
        match self {
            ServiceError::NotFound { .. } => "not_found",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::LeaseExpired(_) => "lease_expired",
            ServiceError::Forbidden(_) => "forbidden",
            ServiceError::Severity(_) => "invalid_judgments",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::Io(_) => "io",
            ServiceError::Json(_) => "json",
        }
    }

    pub(crate) fn not_found(kind: &'static str, id: impl Into<String>) -> Self {
        ServiceError::NotFound { kind, id: id.into() }
    }
}
