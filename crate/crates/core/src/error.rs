use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("validation failed at `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("state sequence has {found} frames, expected {expected}")]
    Length { expected: usize, found: usize },
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ScenarioError {
    pub(crate) fn field(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ScenarioError::Validation { field: field.into(), reason: reason.into() }
    }
}

pub type Result<T, E = ScenarioError> = std::result::Result<T, E>;
