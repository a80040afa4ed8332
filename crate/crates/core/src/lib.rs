//! Representation-learning engine: a shared encoder with pluggable task
//! heads, metric-learning losses, optimizers, curriculum augmentation,
//! retrieval/verification metrics and Grad-CAM, all on a small
//! reverse-mode autodiff tape.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod autodiff;
pub mod data;
pub mod explain;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod tensor;
pub mod train;

pub use autodiff::{Tape, Var};
pub use scalar::Real;
pub use tensor::{Tensor, TensorError};

pub type Tensor64 = Tensor<f64>;
pub type Tensor32 = Tensor<f32>;
pub type Tape64 = Tape<f64>;
pub type Tape32 = Tape<f32>;
pub type Model64 = model::Model<f64>;
pub type Model32 = model::Model<f32>;
