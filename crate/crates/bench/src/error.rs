use routelab_ranker::{RankerError, VariantSpec};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("accuracy is undefined on an empty dataset")]
    EmptyDataset,
    #[error("removal ratio {0} outside [0, 0.5]")]
    RemovalRatio(f64),
    #[error("insertion count {0} outside 0..=10")]
    InsertionCount(usize),
    #[error("instance {instance}: {requested} insertions requested, at most {available} legal noise hypotheses exist")]
    InsufficientNoise {
        instance: String,
        requested: usize,
        available: usize,
    },
    #[error("instance {instance}: {message}")]
    Instance { instance: String, message: String },
    #[error("router returned index {index} for a list of {len} hypotheses")]
    RouteOutOfRange { index: usize, len: usize },
    #[error("test condition {0:?} is defined twice")]
    DuplicateCondition(String),
    #[error("test condition {0:?} is not part of the report")]
    UnknownCondition(String),
    #[error("training {variant} (seed {seed}) failed: {source}")]
    Training {
        variant: VariantSpec,
        seed: u64,
        #[source]
        source: Box<BenchError>,
    },
    #[error("grid config: {0}")]
    Config(String),
    #[error(transparent)]
    Ranker(#[from] RankerError),
    #[error("report serialization: {0}")]
    Serialize(#[from] serde_json::Error),
}
