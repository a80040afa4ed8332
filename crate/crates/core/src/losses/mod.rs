//! Differentiable training objectives.
//!
//! Every loss records its computation on a [`Tape`](crate::Tape) and comes in
//! a `*_per_sample` form (one value per anchor/sample, used by OHEM and MixUp)
//! and a batch-mean form.

mod angular;
mod classification;
mod regularize;
mod spec;
mod triplet;

pub use angular::{arcface, arcface_per_sample, circle, magface, magface_margins, magface_per_sample, MagFaceBounds};
pub use classification::{
    cross_entropy, cross_entropy_per_sample, focal, focal_per_sample, smoothed_targets,
    soft_cross_entropy_per_sample,
};
pub use regularize::{mixup_targets, ohem_filter, ohem_select};
pub use spec::{LossName, LossSpec, MixupSpec};
pub use triplet::{batch_hard_mining, triplet_batch_hard, triplet_batch_hard_per_anchor, PairwiseDistances};

use thiserror::Error;

use crate::tensor::TensorError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LossError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("degenerate batch: anchor {anchor} has no {missing}")]
    DegenerateBatch { anchor: usize, missing: &'static str },
    #[error("cosine {value} outside [-1, 1]")]
    CosineOutOfRange { value: f64 },
    #[error("feature norm at sample {index} is not positive")]
    NonPositiveNorm { index: usize },
    #[error("invalid loss parameter: {0}")]
    InvalidParam(String),
}

pub type Result<T, E = LossError> = std::result::Result<T, E>;

pub(crate) fn check_labels(labels: &[usize], rows: usize, classes: usize) -> Result<()> {
    if labels.len() != rows {
        return Err(TensorError::ShapeMismatch {
            op: "labels",
            detail: format!("{} labels for {rows} rows", labels.len()),
        }
        .into());
    }
    match labels.iter().find(|&&y| y >= classes) {
        Some(&label) => Err(LossError::LabelOutOfRange { label, classes }),
        None => Ok(()),
    }
}
