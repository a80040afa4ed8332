use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ModelError, ModelParams, ParamVars};
use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Mlp,
    Cnn,
}

/// Shape of the shared backbone.
///
/// `mlp`: flatten, then `Linear -> ReLU` for each hidden width, then a final
/// linear map to `embed_dim`. `cnn`: `[conv3x3 -> ReLU -> maxpool2x2]` for
/// each hidden channel count, then flatten and a linear map to `embed_dim`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderConfig {
    pub kind: EncoderKind,
    /// `[C, H, W]`
    pub input_shape: [usize; 3],
    pub hidden: Vec<usize>,
    pub embed_dim: usize,
}

/// Encoder output plus named intermediate activations.
#[derive(Debug, Clone)]
pub struct EncoderTrace {
    pub embedding: Var,
    /// Post-ReLU conv activations (`conv{i}.act`), in depth order. Empty for MLPs.
    pub feature_maps: Vec<(String, Var)>,
}

impl EncoderTrace {
    pub fn feature_map(&self, name: &str) -> Option<Var> {
        self.feature_maps
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

fn uniform<T: Real, R: Rng + ?Sized>(shape: &[usize], fan_in: usize, rng: &mut R) -> Tensor<T> {
    let bound = (1.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let data = (0..n)
        .map(|_| T::lit(rng.random_range(-bound..=bound)))
        .collect();
    Tensor::from_parts(shape.to_vec(), data)
}

pub(crate) fn init_linear<T: Real, R: Rng + ?Sized>(
    params: &mut ModelParams<T>,
    prefix: &str,
    fan_in: usize,
    fan_out: usize,
    rng: &mut R,
) {
    params.insert(
        &format!("{prefix}.weight"),
        uniform(&[fan_in, fan_out], fan_in, rng),
    );
    params.insert(&format!("{prefix}.bias"), uniform(&[fan_out], fan_in, rng));
}

impl EncoderConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.embed_dim < 2 {
            return bad(format!("embed_dim must be >= 2, got {}", self.embed_dim));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden must be a non-empty list of positive widths".into());
        }
        if self.input_shape.contains(&0) {
            return bad(format!("input_shape {:?} has a zero extent", self.input_shape));
        }
        if self.kind == EncoderKind::Cnn {
            let [_, h, w] = self.input_shape;
            let shrink = 1usize << self.hidden.len();
            if h < shrink || w < shrink {
                return bad(format!(
                    "{} pooling stages need at least {shrink}x{shrink} input, got {h}x{w}",
                    self.hidden.len()
                ));
            }
        }
        Ok(())
    }

    fn input_len(&self) -> usize {
        self.input_shape.iter().product()
    }

    /// Width of the flattened features fed to the embedding layer.
    fn flat_width(&self) -> usize {
        match self.kind {
            EncoderKind::Mlp => *self.hidden.last().expect("validated non-empty"),
            EncoderKind::Cnn => {
                let [_, mut h, mut w] = self.input_shape;
                for _ in &self.hidden {
                    h /= 2;
                    w /= 2;
                }
                h * w * self.hidden.last().expect("validated non-empty")
            }
        }
    }

    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        match self.kind {
            EncoderKind::Mlp => {
                let mut fan_in = self.input_len();
                for (i, &h) in self.hidden.iter().enumerate() {
                    out.push((format!("encoder.fc{i}.weight"), vec![fan_in, h]));
                    out.push((format!("encoder.fc{i}.bias"), vec![h]));
                    fan_in = h;
                }
            }
            EncoderKind::Cnn => {
                let mut c = self.input_shape[0];
                for (i, &f) in self.hidden.iter().enumerate() {
                    out.push((format!("encoder.conv{i}.weight"), vec![f, c, 3, 3]));
                    c = f;
                }
            }
        }
        out.push((
            "encoder.embed.weight".into(),
            vec![self.flat_width(), self.embed_dim],
        ));
        out.push(("encoder.embed.bias".into(), vec![self.embed_dim]));
        out
    }

    pub(crate) fn init_params<T: Real, R: Rng + ?Sized>(
        &self,
        params: &mut ModelParams<T>,
        rng: &mut R,
    ) {
        match self.kind {
            EncoderKind::Mlp => {
                let mut fan_in = self.input_len();
                for (i, &h) in self.hidden.iter().enumerate() {
                    init_linear(params, &format!("encoder.fc{i}"), fan_in, h, rng);
                    fan_in = h;
                }
            }
            EncoderKind::Cnn => {
                let mut c = self.input_shape[0];
                for (i, &f) in self.hidden.iter().enumerate() {
                    params.insert(
                        &format!("encoder.conv{i}.weight"),
                        uniform(&[f, c, 3, 3], c * 9, rng),
                    );
                    c = f;
                }
            }
        }
        init_linear(params, "encoder.embed", self.flat_width(), self.embed_dim, rng);
    }

    /// Records `z = f(x)` on the tape for `x: [N, C, H, W]`.
    pub fn forward<T: Real>(
        &self,
        tape: &mut Tape<T>,
        vars: &ParamVars,
        x: Var,
    ) -> Result<EncoderTrace, ModelError> {
        let shape = tape.shape(x).to_vec();
        if shape.len() != 4 || shape[1..] != self.input_shape {
            return Err(TensorError::ShapeMismatch {
                op: "encode",
                detail: format!(
                    "expected [N, {:?}], got {shape:?}",
                    self.input_shape
                ),
            }
            .into());
        }
        let n = shape[0];
        let p = |name: String| vars.get(&name).ok_or(ModelError::MissingParam(name));
        let mut feature_maps = Vec::new();
        let mut h = match self.kind {
            EncoderKind::Mlp => {
                let mut h = tape.reshape(x, &[n, self.input_len()])?;
                for i in 0..self.hidden.len() {
                    h = linear(tape, h, p(format!("encoder.fc{i}.weight"))?, p(format!("encoder.fc{i}.bias"))?)?;
                    h = tape.relu(h)?;
                }
                h
            }
            EncoderKind::Cnn => {
                let mut h = x;
                for i in 0..self.hidden.len() {
                    h = tape.conv2d(h, p(format!("encoder.conv{i}.weight"))?, 1, 1)?;
                    h = tape.relu(h)?;
                    feature_maps.push((format!("conv{i}.act"), h));
                    h = tape.max_pool2(h)?;
                }
                tape.reshape(h, &[n, self.flat_width()])?
            }
        };
        h = linear(
            tape,
            h,
            p("encoder.embed.weight".into())?,
            p("encoder.embed.bias".into())?,
        )?;
        Ok(EncoderTrace {
            embedding: h,
            feature_maps,
        })
    }
}

/// `x · W + b` with `W: [in, out]`.
fn linear<T: Real>(tape: &mut Tape<T>, x: Var, w: Var, b: Var) -> Result<Var, TensorError> {
    let h = tape.matmul(x, w)?;
    tape.add_row_bias(h, b)
}

/// Embeddings `[N, d]` for a batch `[N, C, H, W]`; no normalization applied.
pub fn encode<T: Real>(
    cfg: &EncoderConfig,
    params: &ModelParams<T>,
    x: &Tensor<T>,
) -> Result<Tensor<T>, ModelError> {
    let mut tape = Tape::new();
    let vars = params.bind(&mut tape, false);
    let xv = tape.constant(x.clone());
    let trace = cfg.forward(&mut tape, &vars, xv)?;
    Ok(tape.value(trace.embedding).clone())
}
