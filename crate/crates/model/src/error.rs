use thiserror::Error;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("every lane is masked out")]
    EmptyMap,
    #[error("non-finite values in {0}")]
    NonFinite(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Scenario(#[from] scengen_core::ScenarioError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
