//! Minimal dense-tensor math with a recording tape for reverse-mode
//! differentiation, an Adam optimizer, and a central-difference gradient
//! oracle.
//!
//! Every learned module in the workspace is built from the operations on
//! [`Tape`]. Reductions use a fixed summation order, so two runs over the
//! same inputs produce bit-identical values and gradients.

mod adam;
mod checkpoint;
mod error;
mod gradcheck;
pub mod kernels;
mod params;
mod tape;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{read_params, write_params, CHECKPOINT_VERSION};
pub use error::TensorError;
pub use gradcheck::{finite_difference_gradient, max_relative_error, relative_error};
pub use params::{Gradients, ParamId, Params};
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Result<T, E = TensorError> = std::result::Result<T, E>;
