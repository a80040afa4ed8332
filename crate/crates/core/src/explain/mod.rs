//! Grad-CAM heatmaps for CNN encoders and their PNG overlay rendering.

use std::path::Path;

use image::{Rgb, RgbImage};
use thiserror::Error;

use crate::autodiff::Tape;
use crate::model::{EncoderKind, HeadKind, Model, ModelError};
use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("grad-cam needs a cnn encoder; this model's encoder is {0:?}")]
    WrongEncoderKind(EncoderKind),
    #[error("class {class} out of range for {classes} classes")]
    ClassOutOfRange { class: usize, classes: usize },
    #[error("unknown feature map `{0}`")]
    UnknownLayer(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("writing {path}: {msg}")]
    Io { path: String, msg: String },
}

/// Class-evidence map over the input plane, values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub height: usize,
    pub width: usize,
    /// Row-major `height × width`.
    pub values: Vec<f64>,
    pub target_class: usize,
    pub layer: String,
}

impl Heatmap {
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Sum of values with `row ∈ rows`, `col ∈ cols`.
    pub fn mass(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> f64 {
        rows.flat_map(|r| cols.clone().map(move |c| (r, c)))
            .map(|(r, c)| self.at(r, c))
            .sum()
    }
}

/// Grad-CAM of `target_class` for one `[C, H, W]` image.
///
/// The class score is the raw head logit. Channel weights are the spatial
/// means of its gradient with respect to the feature map `layer` (default:
/// the last conv activation); the map is the ReLU of the weighted channel
/// sum, bilinearly upsampled to `H × W` and divided by its maximum.
pub fn gradcam<T: Real>(
    model: &Model<T>,
    x: &Tensor<T>,
    target_class: usize,
    layer: Option<&str>,
) -> Result<Heatmap, ExplainError> {
    if model.encoder.kind != EncoderKind::Cnn {
        return Err(ExplainError::WrongEncoderKind(model.encoder.kind));
    }
    let classes = if model.head.kind == HeadKind::None { 0 } else { model.head.classes };
    if target_class >= classes {
        return Err(ExplainError::ClassOutOfRange {
            class: target_class,
            classes,
        });
    }
    let [_, h, w] = model.encoder.input_shape;
    let mut batched = vec![1];
    batched.extend_from_slice(x.shape());
    let x = x.reshape(&batched)?;

    let mut tape = Tape::new();
    let vars = model.params.bind(&mut tape, false);
    let xv = tape.leaf(x);
    let (trace, logits) = model.forward(&mut tape, &vars, xv)?;
    let logits = logits.expect("model has a class head");
    let name = match layer {
        Some(l) => l.to_string(),
        None => trace.feature_maps.last().expect("cnn has conv layers").0.clone(),
    };
    let fmap = trace
        .feature_map(&name)
        .ok_or_else(|| ExplainError::UnknownLayer(name.clone()))?;
    let score = tape.gather(logits, &[target_class])?;
    let score = tape.sum(score)?;
    tape.backward(score)?;

    let [_, f, fh, fw] = *tape.shape(fmap) else {
        unreachable!("conv activations are [N, F, h, w]")
    };
    let acts = tape.value(fmap).data();
    let plane = fh * fw;
    let grads: Vec<f64> = match tape.grad(fmap) {
        Some(g) => g.data().iter().map(|v| v.as_f64()).collect(),
        None => vec![0.0; f * plane],
    };
    let mut cam = vec![0.0; plane];
    for ch in 0..f {
        let g = &grads[ch * plane..(ch + 1) * plane];
        let alpha = g.iter().sum::<f64>() / plane as f64;
        for (c, a) in cam.iter_mut().zip(&acts[ch * plane..(ch + 1) * plane]) {
            *c += alpha * a.as_f64();
        }
    }
    cam.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut values = bilinear_upsample(&cam, fh, fw, h, w);
    let peak = values.iter().copied().fold(0.0, f64::max);
    if peak > 0.0 {
        values.iter_mut().for_each(|v| *v /= peak);
    }
    Ok(Heatmap {
        height: h,
        width: w,
        values,
        target_class,
        layer: name,
    })
}

/// Bilinear resize sampling source coordinate `d·s/D` for output pixel `d`.
///
/// With an integer scale factor the first output pixel of every source cell
/// reproduces the cell value exactly and every other pixel is a convex
/// combination, so the maximum stays inside the peak cell's block.
pub fn bilinear_upsample(src: &[f64], sh: usize, sw: usize, dh: usize, dw: usize) -> Vec<f64> {
    let coord = |d: usize, s: usize, dn: usize| -> (usize, usize, f64) {
        let pos = (d as f64 * s as f64 / dn as f64).min((s - 1) as f64);
        let lo = pos.floor() as usize;
        let hi = (lo + 1).min(s - 1);
        (lo, hi, pos - lo as f64)
    };
    let mut out = Vec::with_capacity(dh * dw);
    for y in 0..dh {
        let (y0, y1, ty) = coord(y, sh, dh);
        for x in 0..dw {
            let (x0, x1, tx) = coord(x, sw, dw);
            let top = src[y0 * sw + x0] * (1.0 - tx) + src[y0 * sw + x1] * tx;
            let bottom = src[y1 * sw + x0] * (1.0 - tx) + src[y1 * sw + x1] * tx;
            out.push(top * (1.0 - ty) + bottom * ty);
        }
    }
    out
}

/// Jet colormap for `v ∈ [0, 1]`.
pub fn jet(v: f64) -> [f64; 3] {
    let ch = |c: f64| (1.5 - (4.0 * v - c).abs()).clamp(0.0, 1.0);
    [ch(3.0), ch(2.0), ch(1.0)]
}

/// Input blended with the jet-colored heatmap at per-pixel alpha `0.5·h`,
/// so zero evidence shows the input unchanged.
pub fn overlay<T: Real>(hm: &Heatmap, x: &Tensor<T>) -> Result<RgbImage, ExplainError> {
    let [c, h, w] = *x.shape() else {
        return Err(TensorError::ShapeMismatch {
            op: "render_heatmap",
            detail: format!("expected [C, H, W], got {:?}", x.shape()),
        }
        .into());
    };
    if (h, w) != (hm.height, hm.width) {
        return Err(TensorError::ShapeMismatch {
            op: "render_heatmap",
            detail: format!("image {h}x{w} vs heatmap {}x{}", hm.height, hm.width),
        }
        .into());
    }
    let px = x.data();
    let base = |ch: usize, r: usize, col: usize| -> f64 {
        let src = if c == 3 { ch } else { 0 };
        px[(src * h + r) * w + col].as_f64().clamp(0.0, 1.0)
    };
    Ok(RgbImage::from_fn(w as u32, h as u32, |col, r| {
        let (r, col) = (r as usize, col as usize);
        let v = hm.at(r, col);
        let a = 0.5 * v;
        let color = jet(v);
        let mut rgb = [0u8; 3];
        for ch in 0..3 {
            let blended = (1.0 - a) * base(ch, r, col) + a * color[ch];
            rgb[ch] = (blended * 255.0).round() as u8;
        }
        Rgb(rgb)
    }))
}

/// Writes [`overlay`] as a PNG.
pub fn render_heatmap<T: Real>(hm: &Heatmap, x: &Tensor<T>, out_path: &Path) -> Result<(), ExplainError> {
    overlay(hm, x)?.save(out_path).map_err(|e| ExplainError::Io {
        path: out_path.display().to_string(),
        msg: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{EncoderConfig, HeadConfig};
    use crate::rng::stream;

    fn cnn(classes: usize) -> Model {
        let enc = EncoderConfig {
            kind: EncoderKind::Cnn,
            input_shape: [1, 8, 8],
            hidden: vec![3, 4],
            embed_dim: 4,
        };
        Model::init(enc, HeadConfig::linear(classes), &mut stream(5, &[0])).unwrap()
    }

    fn image() -> Tensor {
        Tensor::new(vec![1, 8, 8], (0..64).map(|i| ((i * 7) % 11) as f64 / 11.0).collect()).unwrap()
    }

    #[test]
    fn values_in_unit_range() {
        let m = cnn(3);
        for c in 0..3 {
            let hm = gradcam(&m, &image(), c, None).unwrap();
            assert_eq!(hm.values.len(), 64);
            assert_eq!(hm.layer, "conv1.act");
            assert!(hm.values.iter().all(|&v| (0.0..=1.0).contains(&v)));
            let peak = hm.values.iter().copied().fold(0.0, f64::max);
            assert!(peak == 0.0 || (peak - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn input_independent_score_gives_zero_map() {
        let mut m = cnn(2);
        let w = m.params.get_mut("head.weight").unwrap();
        *w = Tensor::zeros(w.shape());
        let hm = gradcam(&m, &image(), 1, None).unwrap();
        assert!(hm.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn errors() {
        let m = cnn(2);
        assert!(matches!(
            gradcam(&m, &image(), 2, None),
            Err(ExplainError::ClassOutOfRange { class: 2, classes: 2 })
        ));
        let enc = EncoderConfig {
            kind: EncoderKind::Mlp,
            input_shape: [1, 8, 8],
            hidden: vec![3],
            embed_dim: 2,
        };
        let mlp: Model = Model::init(enc, HeadConfig::linear(2), &mut stream(1, &[0])).unwrap();
        assert!(matches!(
            gradcam(&mlp, &image(), 0, None),
            Err(ExplainError::WrongEncoderKind(EncoderKind::Mlp))
        ));
        assert!(matches!(gradcam(&m, &image(), 0, Some("conv9.act")), Err(ExplainError::UnknownLayer(_))));
    }

    #[test]
    fn upsample_constant_and_identity() {
        assert!(bilinear_upsample(&[0.3; 4], 2, 2, 6, 6).iter().all(|&v| (v - 0.3).abs() < 1e-15));
        let src: Vec<f64> = (0..9).map(f64::from).collect();
        assert_eq!(bilinear_upsample(&src, 3, 3, 3, 3), src);
        // 1-D view: [0, 2] doubled is [0, 1, 2, 2]
        assert_eq!(bilinear_upsample(&[0.0, 2.0], 1, 2, 1, 4), vec![0.0, 1.0, 2.0, 2.0]);
    }

    #[test]
    fn zero_map_renders_input() {
        let hm = Heatmap {
            height: 8,
            width: 8,
            values: vec![0.0; 64],
            target_class: 0,
            layer: "conv1.act".into(),
        };
        let img = overlay(&hm, &image()).unwrap();
        assert_eq!(img.dimensions(), (8, 8));
        for (x, y, p) in img.enumerate_pixels() {
            let v = (image().at(&[0, y as usize, x as usize]) * 255.0).round() as u8;
            assert_eq!(p.0, [v, v, v]);
        }
    }

    #[test]
    fn render_is_byte_stable() {
        let dir = tempfile::tempdir().unwrap();
        let m = cnn(2);
        let hm = gradcam(&m, &image(), 0, None).unwrap();
        let (a, b) = (dir.path().join("a.png"), dir.path().join("b.png"));
        render_heatmap(&hm, &image(), &a).unwrap();
        render_heatmap(&hm, &image(), &b).unwrap();
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
    }
}
