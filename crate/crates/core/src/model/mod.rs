//! Shared encoder and task heads.
//!
//! The encoder maps an image batch `[N, C, H, W]` to embeddings `[N, d]`;
//! a head maps embeddings to class scores. Parameters live in a
//! [`ModelParams`] split into an `encoder` group and a `head` group.

mod encoder;
mod head;
mod params;

pub use encoder::{encode, EncoderConfig, EncoderKind, EncoderTrace};
pub use head::{classify, cosine_logits, cosine_logits_tensor, head_logits, HeadConfig, HeadKind, NORM_EPS};
pub use params::{ModelParams, ParamGroup, ParamMap, ParamVars};

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error("invalid model configuration: {0}")]
    InvalidConfig(String),
    #[error("missing parameter `{0}`")]
    MissingParam(String),
}

/// Encoder, head and their parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<T = f64> {
    pub encoder: EncoderConfig,
    pub head: HeadConfig,
    pub params: ModelParams<T>,
}

impl<T: Real> Model<T> {
    /// Builds a model with uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights.
    pub fn init<R: Rng + ?Sized>(
        encoder: EncoderConfig,
        head: HeadConfig,
        rng: &mut R,
    ) -> Result<Self, ModelError> {
        encoder.validate()?;
        let mut params = ModelParams::default();
        encoder.init_params(&mut params, rng);
        head.init_params(encoder.embed_dim, &mut params, rng);
        Ok(Self {
            encoder,
            head,
            params,
        })
    }

    /// Checks that every expected parameter exists with the expected shape.
    pub fn check_params(&self) -> Result<(), ModelError> {
        let mut expected = self.encoder.param_shapes();
        expected.extend(self.head.param_shapes(self.encoder.embed_dim));
        for (name, shape) in &expected {
            let t = self
                .params
                .get(name)
                .ok_or_else(|| ModelError::MissingParam(name.clone()))?;
            if t.shape() != shape.as_slice() {
                return Err(TensorError::ShapeMismatch {
                    op: "check_params",
                    detail: format!("{name}: expected {shape:?}, found {:?}", t.shape()),
                }
                .into());
            }
        }
        if self.params.len() != expected.len() {
            return Err(ModelError::InvalidConfig(format!(
                "expected {} parameters, found {}",
                expected.len(),
                self.params.len()
            )));
        }
        Ok(())
    }

    /// Embeddings for a batch, outside any training tape.
    pub fn embed(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        encode(&self.encoder, &self.params, x)
    }

    /// Head scores for a batch, outside any training tape.
    pub fn logits(&self, x: &Tensor<T>) -> Result<Tensor<T>, ModelError> {
        let mut tape = Tape::new();
        let vars = self.params.bind(&mut tape, false);
        let xv = tape.constant(x.clone());
        let trace = self.encoder.forward(&mut tape, &vars, xv)?;
        let out = head_logits(&self.head, &mut tape, &vars, trace.embedding)?;
        Ok(tape.value(out).clone())
    }

    /// Forward through encoder and head on an existing tape.
    pub fn forward(
        &self,
        tape: &mut Tape<T>,
        vars: &ParamVars,
        x: Var,
    ) -> Result<(EncoderTrace, Option<Var>), ModelError> {
        let trace = self.encoder.forward(tape, vars, x)?;
        let logits = match self.head.kind {
            HeadKind::None => None,
            _ => Some(head_logits(&self.head, tape, vars, trace.embedding)?),
        };
        Ok((trace, logits))
    }
}
