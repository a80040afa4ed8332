use rand::Rng;
use serde::{Deserialize, Serialize};

use super::encoder::init_linear;
use super::{ModelError, ModelParams, ParamVars};
use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::{Result, Tensor, TensorError};

/// Epsilon used when normalizing embeddings and class weights.
pub const NORM_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadKind {
    /// Embedding-only model (triplet training).
    None,
    /// `z · Wᵀ + b`
    Linear,
    /// `ẑ · Ŵᵀ`, for angular-margin losses.
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeadConfig {
    pub kind: HeadKind,
    pub classes: usize,
}

impl HeadConfig {
    pub fn linear(classes: usize) -> Self {
        Self {
            kind: HeadKind::Linear,
            classes,
        }
    }

    pub fn cosine(classes: usize) -> Self {
        Self {
            kind: HeadKind::Cosine,
            classes,
        }
    }

    pub fn none() -> Self {
        Self {
            kind: HeadKind::None,
            classes: 0,
        }
    }

    pub fn param_shapes(&self, embed_dim: usize) -> Vec<(String, Vec<usize>)> {
        match self.kind {
            HeadKind::None => vec![],
            HeadKind::Linear => vec![
                ("head.bias".into(), vec![self.classes]),
                ("head.weight".into(), vec![self.classes, embed_dim]),
            ],
            HeadKind::Cosine => vec![("head.weight".into(), vec![self.classes, embed_dim])],
        }
    }

    pub(crate) fn init_params<T: Real, R: Rng + ?Sized>(
        &self,
        embed_dim: usize,
        params: &mut ModelParams<T>,
        rng: &mut R,
    ) {
        if self.kind == HeadKind::None {
            return;
        }
        // stored as [C, d]; drawn as [d, C] with fan_in d then transposed
        let mut tmp = ModelParams::default();
        init_linear(&mut tmp, "head.tmp", embed_dim, self.classes, rng);
        let w = tmp.get("head.tmp.weight").expect("just inserted").transpose().expect("rank 2");
        params.insert("head.weight", w);
        if self.kind == HeadKind::Linear {
            params.insert("head.bias", tmp.get("head.tmp.bias").expect("just inserted").clone());
        }
    }
}

/// Linear classifier logits `z · Wᵀ + b` for `W: [C, d]`, `b: [C]`.
pub fn classify<T: Real>(tape: &mut Tape<T>, weight: Var, bias: Var, z: Var) -> Result<Var> {
    check_dims(tape, weight, z)?;
    let wt = tape.transpose(weight)?;
    let logits = tape.matmul(z, wt)?;
    tape.add_row_bias(logits, bias)
}

/// Cosine of the angle between each embedding and each class weight row.
pub fn cosine_logits<T: Real>(tape: &mut Tape<T>, weight: Var, z: Var) -> Result<Var> {
    check_dims(tape, weight, z)?;
    let eps = T::lit(NORM_EPS);
    let wn = tape.l2_normalize(weight, eps)?;
    let zn = tape.l2_normalize(z, eps)?;
    let wt = tape.transpose(wn)?;
    tape.matmul(zn, wt)
}

fn check_dims<T: Real>(tape: &Tape<T>, weight: Var, z: Var) -> Result<()> {
    let (ws, zs) = (tape.shape(weight), tape.shape(z));
    if ws.len() != 2 || zs.len() != 2 || ws[1] != zs[1] {
        return Err(TensorError::ShapeMismatch {
            op: "head",
            detail: format!("weight {ws:?} vs embeddings {zs:?}"),
        });
    }
    Ok(())
}

/// Dispatches on the head kind.
pub fn head_logits<T: Real>(
    cfg: &HeadConfig,
    tape: &mut Tape<T>,
    vars: &ParamVars,
    z: Var,
) -> std::result::Result<Var, ModelError> {
    let p = |name: &str| vars.get(name).ok_or_else(|| ModelError::MissingParam(name.into()));
    match cfg.kind {
        HeadKind::None => Err(ModelError::InvalidConfig("model has no class head".into())),
        HeadKind::Linear => Ok(classify(tape, p("head.weight")?, p("head.bias")?, z)?),
        HeadKind::Cosine => Ok(cosine_logits(tape, p("head.weight")?, z)?),
    }
}

/// Tensor-level convenience for [`cosine_logits`].
pub fn cosine_logits_tensor<T: Real>(weight: &Tensor<T>, z: &Tensor<T>) -> Result<Tensor<T>> {
    let mut tape = Tape::<T>::new();
    let w = tape.constant(weight.clone());
    let zv = tape.constant(z.clone());
    let out = cosine_logits(&mut tape, w, zv)?;
    Ok(tape.value(out).clone())
}
