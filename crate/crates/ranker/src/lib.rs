//! List-wise hypothesis ranker.
//!
//! Each hypothesis is embedded independently, a context encoder mixes
//! information across the list, and a two-layer head scores
//! `e_i ++ c_i`. Routing picks the highest score.

pub mod checkpoint;
pub mod config;
pub mod encoders;
mod error;
pub mod loss;
pub mod model;
pub mod train;
pub mod vocab;

pub use config::{Dims, EncoderKind, HeadActivation, LossKind, TrainConfig, VariantSpec};
pub use error::RankerError;
pub use loss::{bce_loss, mce_loss};
pub use model::{argmax, Ranker, Route};
pub use train::{train, train_encoded, training_accuracy, TrainOutcome};
pub use vocab::{EncodedInstance, EncodedList, Vocab};
