use std::path::PathBuf;

use routelab_autodiff::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum RankerError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("hypothesis list is empty")]
    EmptyHypotheses,
    #[error("gold index {index} out of range for {len} hypotheses")]
    GoldOutOfRange { index: usize, len: usize },
    #[error("skill {0:?} has no embedding row")]
    UnknownSkill(String),
    #[error("token id {token} outside the token table (size {size})")]
    TokenOutOfRange { token: u32, size: usize },
    #[error("context has {got} signals, model expects {expected}")]
    ContextLength { got: usize, expected: usize },
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("loss became non-finite in epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("checkpoint not found: {0}")]
    CheckpointNotFound(PathBuf),
    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },
}
