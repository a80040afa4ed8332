use serde::{Deserialize, Serialize};

use super::{LrScale, OptimError, OptimState};
use crate::model::{ModelParams, ParamMap};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SgdConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BaseOptimizer {
    Sgd(SgdConfig),
    Adam(AdamConfig),
}

impl BaseOptimizer {
    pub fn step<T: Real>(
        &self,
        params: &mut ModelParams<T>,
        grads: &ParamMap<T>,
        state: &mut OptimState<T>,
        lr: f64,
        scale: &LrScale,
    ) -> Result<(), OptimError> {
        match self {
            BaseOptimizer::Sgd(cfg) => sgd_step(params, grads, state, cfg, lr, scale),
            BaseOptimizer::Adam(cfg) => adam_step(params, grads, state, cfg, lr, scale),
        }
    }
}

fn grad_for<'a, T: Real>(grads: &'a ParamMap<T>, name: &str, p: &Tensor<T>) -> Result<&'a Tensor<T>, OptimError> {
    let g = grads
        .get(name)
        .ok_or_else(|| OptimError::MissingGrad(name.to_string()))?;
    if g.shape() != p.shape() {
        return Err(OptimError::GradShape {
            name: name.to_string(),
            grad: g.shape().to_vec(),
            param: p.shape().to_vec(),
        });
    }
    Ok(g)
}

fn check_all<T: Real>(params: &ModelParams<T>, grads: &ParamMap<T>) -> Result<(), OptimError> {
    for (name, p) in params.iter() {
        grad_for(grads, &name, p)?;
    }
    Ok(())
}

/// Momentum SGD with coupled weight decay:
/// `v ← β·v + g + wd·p`, `p ← p − lr·v`.
pub fn sgd_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ParamMap<T>,
    state: &mut OptimState<T>,
    cfg: &SgdConfig,
    lr: f64,
    scale: &LrScale,
) -> Result<(), OptimError> {
    check_all(params, grads)?;
    let (beta, wd) = (T::lit(cfg.momentum), T::lit(cfg.weight_decay));
    for (name, p) in params.iter_mut() {
        let g = &grads[&name];
        let step = T::lit(lr * scale.for_param(&name));
        let v = state
            .momentum
            .entry(name)
            .or_insert_with(|| Tensor::zeros(p.shape()));
        for ((pv, vv), &gv) in p.data_mut().iter_mut().zip(v.data_mut()).zip(g.data()) {
            *vv = beta * *vv + gv + wd * *pv;
            *pv -= step * *vv;
        }
    }
    state.step += 1;
    Ok(())
}

/// Bias-corrected Adam with coupled weight decay.
pub fn adam_step<T: Real>(
    params: &mut ModelParams<T>,
    grads: &ParamMap<T>,
    state: &mut OptimState<T>,
    cfg: &AdamConfig,
    lr: f64,
    scale: &LrScale,
) -> Result<(), OptimError> {
    check_all(params, grads)?;
    state.step += 1;
    let t = state.step as i32;
    let (b1, b2, eps, wd) = (
        T::lit(cfg.beta1),
        T::lit(cfg.beta2),
        T::lit(cfg.eps),
        T::lit(cfg.weight_decay),
    );
    let bc1 = T::one() - b1.powi(t);
    let bc2 = T::one() - b2.powi(t);
    for (name, p) in params.iter_mut() {
        let g = &grads[&name];
        let step = T::lit(lr * scale.for_param(&name));
        let m = state
            .first_moment
            .entry(name.clone())
            .or_insert_with(|| Tensor::zeros(p.shape()));
        let v = state
            .second_moment
            .entry(name)
            .or_insert_with(|| Tensor::zeros(p.shape()));
        for (((pv, mv), vv), &gv) in p
            .data_mut()
            .iter_mut()
            .zip(m.data_mut())
            .zip(v.data_mut())
            .zip(g.data())
        {
            let gd = gv + wd * *pv;
            *mv = b1 * *mv + (T::one() - b1) * gd;
            *vv = b2 * *vv + (T::one() - b2) * gd * gd;
            let m_hat = *mv / bc1;
            let v_hat = *vv / bc2;
            *pv -= step * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
