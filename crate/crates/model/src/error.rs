use thiserror::Error;

use graft_tensor::{CheckpointError, TensorError};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("query must contain at least one token")]
    EmptyQuery,
    #[error("edge prediction needs at least one existing node")]
    EmptyGraph,
    #[error("prediction/gold length mismatch: {preds} vs {golds}")]
    LengthMismatch { preds: usize, golds: usize },
    #[error("training triple {index} does not survive the oracle round trip")]
    OracleMismatch { index: usize },
    #[error("invalid model config: {0}")]
    BadConfig(String),
    #[error("checkpoint does not match the expected model: {0}")]
    ConfigMismatch(String),
    #[error("{0}")]
    Invalid(String),
}
