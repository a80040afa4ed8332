//! Synthetic datasets, on-disk formats, batch samplers and the curriculum
//! augmentation pipeline.

mod augment;
mod io;
mod sampler;
mod synthetic;

pub use augment::{
    augment_sample, color_jitter, cutout, hflip, intensity, mixup_images, random_crop, random_crop_at,
    scale_channels, AugmentOp, AugmentPlan,
};
pub use io::{load_dir, load_image_folder, read_dord, read_png, write_dord, write_png, DORD_MAGIC, DORD_VERSION};
pub use sampler::{pk_batches, shuffled_batches};
pub use synthetic::{generate, Layout, Split, SyntheticSpec};

use thiserror::Error;

use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum DataError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("bad dataset file: {0}")]
    Format(String),
    #[error("image import failed: {0}")]
    Image(String),
    #[error("invalid data spec: {0}")]
    Invalid(String),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, DataError>;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub class: u32,
    pub identity: u32,
    /// Row-major `C×H×W` pixels in `[0, 1]`.
    pub pixels: Vec<f32>,
}

/// A balanced labelled image set: `per_class` samples for each of `classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub classes: usize,
    pub per_class: usize,
    /// `[C, H, W]`.
    pub image: [usize; 3],
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn pixels_per_image(&self) -> usize {
        self.image.iter().product()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class as usize).collect()
    }

    pub fn identities(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.identity as usize).collect()
    }

    /// Sample `i` as a `[C, H, W]` tensor.
    pub fn image_tensor<T: Real>(&self, i: usize) -> Result<Tensor<T>> {
        let data = self.samples[i].pixels.iter().map(|&p| T::lit(p as f64)).collect();
        Ok(Tensor::new(self.image.to_vec(), data)?)
    }

    /// Stacks the given `[C, H, W]` images into one `[N, C, H, W]` batch.
    pub fn stack<T: Real>(images: &[Tensor<T>]) -> Result<Tensor<T>> {
        let first = images
            .first()
            .ok_or_else(|| DataError::Invalid("cannot stack an empty batch".into()))?;
        let mut shape = vec![images.len()];
        shape.extend_from_slice(first.shape());
        let mut data = Vec::with_capacity(first.len() * images.len());
        for img in images {
            if img.shape() != first.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "stack",
                    detail: format!("{:?} vs {:?}", img.shape(), first.shape()),
                }
                .into());
            }
            data.extend_from_slice(img.data());
        }
        Ok(Tensor::new(shape, data)?)
    }

    pub(crate) fn check(&self) -> Result<()> {
        let n = self.pixels_per_image();
        if self.samples.len() != self.classes * self.per_class {
            return Err(DataError::Format(format!(
                "{} samples for {} classes x {} per class",
                self.samples.len(),
                self.classes,
                self.per_class
            )));
        }
        for (i, s) in self.samples.iter().enumerate() {
            if s.pixels.len() != n {
                return Err(DataError::Format(format!(
                    "sample {i} has {} pixels, expected {n}",
                    s.pixels.len()
                )));
            }
            if s.class as usize >= self.classes {
                return Err(DataError::Format(format!(
                    "sample {i} has class {} of {}",
                    s.class, self.classes
                )));
            }
        }
        Ok(())
    }
}
