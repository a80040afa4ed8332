use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{salt, stream};
use crate::scalar::Real;
use crate::tensor::{Result, Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum AugmentOp {
    /// Zero-pad by `pad` and crop back at a random offset.
    RandomCrop { pad: usize },
    Hflip { p: f64 },
    /// Per-channel multiplicative scale in `[1 − max_scale, 1 + max_scale]`.
    ColorJitter { max_scale: f64 },
    Cutout {
        size: usize,
        #[serde(default)]
        fill: f64,
    },
}

/// Ordered augmentation ops with a curriculum over epochs.
///
/// The intensity `I(epoch)` scales crop and flip probabilities, the jitter
/// range and the cutout side length.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AugmentPlan {
    #[serde(default)]
    pub ops: Vec<AugmentOp>,
    #[serde(default)]
    pub aug_epoch: usize,
    #[serde(default)]
    pub prog_learn: bool,
}

impl AugmentPlan {
    /// Checks op parameters against the image size `[C, H, W]`; errors carry
    /// the offending key.
    pub fn validate(&self, image: [usize; 3]) -> std::result::Result<(), (String, String)> {
        for (i, op) in self.ops.iter().enumerate() {
            let key = |k: &str| format!("ops[{i}].{k}");
            match *op {
                AugmentOp::Hflip { p } if !(0.0..=1.0).contains(&p) => {
                    return Err((key("p"), format!("{p} must be in [0, 1]")));
                }
                AugmentOp::ColorJitter { max_scale } if !(max_scale >= 0.0 && max_scale.is_finite()) => {
                    return Err((key("max_scale"), format!("{max_scale} must be >= 0")));
                }
                AugmentOp::Cutout { size, fill } => {
                    if size > image[1].min(image[2]) {
                        return Err((key("size"), format!("{size} exceeds min(H, W)")));
                    }
                    if !(0.0..=1.0).contains(&fill) {
                        return Err((key("fill"), format!("{fill} must be in [0, 1]")));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Curriculum intensity in `[0, 1]`: a linear ramp reaching 1 at `aug_epoch`
/// when `prog_learn` is set, otherwise a step at `aug_epoch`.
pub fn intensity(epoch: usize, plan: &AugmentPlan) -> f64 {
    if plan.prog_learn {
        if plan.aug_epoch == 0 {
            1.0
        } else {
            (epoch as f64 / plan.aug_epoch as f64).min(1.0)
        }
    } else if epoch >= plan.aug_epoch {
        1.0
    } else {
        0.0
    }
}

/// Applies the plan to sample `index` at `epoch` using the stream
/// `(seed, epoch, index)`.
pub fn augment_sample<T: Real>(
    plan: &AugmentPlan,
    img: &Tensor<T>,
    epoch: usize,
    seed: u64,
    index: usize,
) -> Result<Tensor<T>> {
    let level = intensity(epoch, plan);
    if level == 0.0 || plan.ops.is_empty() {
        return Ok(img.clone());
    }
    let (_, h, w) = chw(img, "augment")?;
    let mut rng = stream(seed, &[salt::AUGMENT, epoch as u64, index as u64]);
    let mut out = img.clone();
    for op in &plan.ops {
        out = match *op {
            AugmentOp::RandomCrop { pad } => {
                if rng.random::<f64>() < level {
                    random_crop(&out, pad, &mut rng)?
                } else {
                    out
                }
            }
            AugmentOp::Hflip { p } => {
                if rng.random::<f64>() < p * level {
                    hflip(&out)?
                } else {
                    out
                }
            }
            AugmentOp::ColorJitter { max_scale } => color_jitter(&out, max_scale * level, &mut rng)?,
            AugmentOp::Cutout { size, fill } => {
                let side = (size as f64 * level).round() as usize;
                let center = (rng.random_range(0..h), rng.random_range(0..w));
                cutout(&out, center, side, fill)?
            }
        };
    }
    Ok(out)
}

fn chw<T: Real>(img: &Tensor<T>, op: &'static str) -> Result<(usize, usize, usize)> {
    match *img.shape() {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(TensorError::ShapeMismatch {
            op,
            detail: format!("expected [C, H, W], got {:?}", img.shape()),
        }),
    }
}

/// Zero-pads by `pad`, then crops `H×W` at a uniform offset in `[0, 2·pad]²`.
pub fn random_crop<T: Real>(img: &Tensor<T>, pad: usize, rng: &mut impl Rng) -> Result<Tensor<T>> {
    let offset = (rng.random_range(0..=2 * pad), rng.random_range(0..=2 * pad));
    random_crop_at(img, pad, offset)
}

/// Crop of the zero-padded image at `offset = (row, col)` in padded
/// coordinates; `offset = (pad, pad)` is the identity.
pub fn random_crop_at<T: Real>(img: &Tensor<T>, pad: usize, offset: (usize, usize)) -> Result<Tensor<T>> {
    let (c, h, w) = chw(img, "random_crop")?;
    if offset.0 > 2 * pad || offset.1 > 2 * pad {
        return Err(TensorError::InvalidArgument {
            op: "random_crop",
            detail: format!("offset {offset:?} outside [0, {}]", 2 * pad),
        });
    }
    let src = img.data();
    let mut out = vec![T::zero(); c * h * w];
    for ch in 0..c {
        for y in 0..h {
            let sy = (y + offset.0) as isize - pad as isize;
            if sy < 0 || sy >= h as isize {
                continue;
            }
            for x in 0..w {
                let sx = (x + offset.1) as isize - pad as isize;
                if sx < 0 || sx >= w as isize {
                    continue;
                }
                out[(ch * h + y) * w + x] = src[(ch * h + sy as usize) * w + sx as usize];
            }
        }
    }
    Tensor::new(img.shape().to_vec(), out)
}

pub fn hflip<T: Real>(img: &Tensor<T>) -> Result<Tensor<T>> {
    let (_, _, w) = chw(img, "hflip")?;
    let data = img
        .data()
        .chunks(w)
        .flat_map(|row| row.iter().rev().copied())
        .collect();
    Tensor::new(img.shape().to_vec(), data)
}

/// Multiplies channel `c` by `scales[c]` and clamps to `[0, 1]`.
pub fn scale_channels<T: Real>(img: &Tensor<T>, scales: &[f64]) -> Result<Tensor<T>> {
    let (c, h, w) = chw(img, "color_jitter")?;
    if scales.len() != c {
        return Err(TensorError::ShapeMismatch {
            op: "color_jitter",
            detail: format!("{} scales for {c} channels", scales.len()),
        });
    }
    let plane = h * w;
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| (v * T::lit(scales[i / plane])).max(T::zero()).min(T::one()))
        .collect();
    Tensor::new(img.shape().to_vec(), data)
}

pub fn color_jitter<T: Real>(img: &Tensor<T>, max_scale: f64, rng: &mut impl Rng) -> Result<Tensor<T>> {
    let (c, _, _) = chw(img, "color_jitter")?;
    if !(max_scale >= 0.0) {
        return Err(TensorError::InvalidArgument {
            op: "color_jitter",
            detail: format!("max_scale {max_scale} must be >= 0"),
        });
    }
    if max_scale == 0.0 {
        return Ok(img.clone());
    }
    let scales: Vec<f64> = (0..c)
        .map(|_| rng.random_range(1.0 - max_scale..=1.0 + max_scale))
        .collect();
    scale_channels(img, &scales)
}

/// Sets the square of side `size` centered at `center = (row, col)`,
/// clipped to the image, to `fill` in every channel.
pub fn cutout<T: Real>(img: &Tensor<T>, center: (usize, usize), size: usize, fill: f64) -> Result<Tensor<T>> {
    let (c, h, w) = chw(img, "cutout")?;
    let mut out = img.clone().into_data();
    if size > 0 {
        let lo = |p: usize| p as isize - (size / 2) as isize;
        let (r0, c0) = (lo(center.0), lo(center.1));
        let rows = r0.max(0) as usize..((r0 + size as isize).max(0) as usize).min(h);
        let cols = c0.max(0) as usize..((c0 + size as isize).max(0) as usize).min(w);
        let fill = T::lit(fill);
        for ch in 0..c {
            for y in rows.clone() {
                for x in cols.clone() {
                    out[(ch * h + y) * w + x] = fill;
                }
            }
        }
    }
    Tensor::new(img.shape().to_vec(), out)
}

/// `λ·x1 + (1 − λ)·x2`.
pub fn mixup_images<T: Real>(x1: &Tensor<T>, x2: &Tensor<T>, lambda: f64) -> Result<Tensor<T>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(TensorError::InvalidArgument {
            op: "mixup",
            detail: format!("lambda {lambda} not in [0, 1]"),
        });
    }
    let (a, b) = (T::lit(lambda), T::lit(1.0 - lambda));
    x1.zip_map(x2, "mixup", |p, q| a * p + b * q)
}
