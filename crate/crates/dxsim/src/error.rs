use std::fmt;

use dxsim_core::{EmbeddingError, EngineError};

/// A failure carrying its process exit code: 1 domain error, 2 I/O or usage
/// error, 3 empty result.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn domain(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    pub fn empty(message: impl Into<String>) -> Self {
        Self {
            code: 3,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

/// Stable machine-readable tag, shared by CLI diagnostics and HTTP error bodies.
pub fn error_tag(err: &EngineError) -> &'static str {
    match err {
        EngineError::UnknownId(_) => "unknown_id",
        EngineError::EmptyCandidatePool => "empty_candidate_pool",
        EngineError::EmptyText => "empty_text",
        EngineError::InvalidRequest(_) => "invalid_request",
        EngineError::Embedding(e) => embedding_tag(e),
        EngineError::Preprocess(_) => "empty_document",
        EngineError::Report(_) => "internal_error",
    }
}

pub fn embedding_tag(err: &EmbeddingError) -> &'static str {
    match err.root() {
        EmbeddingError::BackendUnavailable(_) => "backend_unavailable",
        EmbeddingError::ProtocolError(_) => "backend_protocol_error",
        EmbeddingError::DimensionMismatch { .. } => "dimension_mismatch",
        EmbeddingError::EmptyText => "empty_text",
        EmbeddingError::InvalidConfig(_) => "invalid_config",
        _ => "embedding_failed",
    }
}

impl From<EngineError> for CliError {
    fn from(err: EngineError) -> Self {
        let message = format!("{}: {err}", error_tag(&err));
        match err {
            EngineError::EmptyCandidatePool => CliError::empty(message),
            EngineError::Embedding(ref e)
                if matches!(e.root(), EmbeddingError::InvalidConfig(_)) =>
            {
                CliError::usage(message)
            }
            _ => CliError::domain(message),
        }
    }
}
