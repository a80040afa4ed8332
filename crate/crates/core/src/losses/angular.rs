use std::f64::consts::{FRAC_PI_2, PI};

use super::{check_labels, LossError, Result};
use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

/// Slack allowed on cosine inputs before they are rejected.
const COS_SLACK: f64 = 1e-9;

enum Margin {
    Fixed(f64),
    PerSample(Var),
}

fn cos_dims<T: Real>(tape: &Tape<T>, cos: Var) -> Result<(usize, usize)> {
    let [n, c] = *tape.shape(cos) else {
        return Err(TensorError::ShapeMismatch {
            op: "angular",
            detail: format!("expected [N, C] cosines, got {:?}", tape.shape(cos)),
        }
        .into());
    };
    if let Some(&v) = tape
        .value(cos)
        .data()
        .iter()
        .find(|v| v.abs().as_f64() > 1.0 + COS_SLACK)
    {
        return Err(LossError::CosineOutOfRange { value: v.as_f64() });
    }
    Ok((n, c))
}

fn check_scale(s: f64) -> Result<()> {
    if s > 0.0 && s.is_finite() {
        Ok(())
    } else {
        Err(LossError::InvalidParam(format!("scale s={s} must be positive")))
    }
}

fn check_margin(m: f64) -> Result<()> {
    if (0.0..FRAC_PI_2).contains(&m) {
        Ok(())
    } else {
        Err(LossError::InvalidParam(format!("margin m={m} not in [0, pi/2)")))
    }
}

/// Softmax cross-entropy over `s·cos θ_j` with the target logit replaced by
/// `s·cos(θ_y + m)`; when `θ_y + m > π` the target uses `cos θ_y − m·sin m`.
fn margin_softmax_per_sample<T: Real>(
    tape: &mut Tape<T>,
    cos: Var,
    labels: &[usize],
    s: f64,
    margin: Margin,
) -> Result<Var> {
    let (n, c) = cos_dims(tape, cos)?;
    check_labels(labels, n, c)?;
    let cos_y = tape.gather_rows(cos, labels)?;

    let target = match margin {
        Margin::Fixed(0.0) => cos_y,
        margin => {
            let theta = tape.arccos(cos_y)?;
            let (shifted, m_vals, sin_m) = match margin {
                Margin::Fixed(m) => {
                    let shifted = tape.add_scalar(theta, T::lit(m))?;
                    let sin_m = tape.constant(Tensor::full(&[n], T::lit(m * m.sin())));
                    (shifted, vec![m; n], sin_m)
                }
                Margin::PerSample(mv) => {
                    let shifted = tape.add(theta, mv)?;
                    // m·sin m, with sin m = cos(π/2 − m)
                    let neg = tape.neg(mv)?;
                    let comp = tape.add_scalar(neg, T::lit(FRAC_PI_2))?;
                    let sin = tape.cos(comp)?;
                    let m_sin = tape.mul(mv, sin)?;
                    let vals = tape.value(mv).data().iter().map(|v| v.as_f64()).collect();
                    (shifted, vals, m_sin)
                }
            };
            let main = tape.cos(shifted)?;
            let fallback = tape.sub(cos_y, sin_m)?;
            let theta_vals = tape.value(theta).data().to_vec();
            let use_fallback: Vec<T> = theta_vals
                .iter()
                .zip(&m_vals)
                .map(|(&t, &m)| if t.as_f64() + m > PI { T::one() } else { T::zero() })
                .collect();
            if use_fallback.iter().all(|&f| f == T::zero()) {
                main
            } else {
                let keep: Vec<T> = use_fallback.iter().map(|&f| T::one() - f).collect();
                let fb_mask = tape.constant(Tensor::from_parts(vec![n], use_fallback));
                let main_mask = tape.constant(Tensor::from_parts(vec![n], keep));
                let a = tape.mul(fb_mask, fallback)?;
                let b = tape.mul(main_mask, main)?;
                tape.add(a, b)?
            }
        }
    };

    // logits = s·(cos + onehot ⊙ (target − cos_y) broadcast over columns)
    let delta = tape.sub(target, cos_y)?;
    let delta_col = tape.reshape(delta, &[n, 1])?;
    let ones_row = tape.constant(Tensor::ones(&[1, c]));
    let spread = tape.matmul(delta_col, ones_row)?;
    let mut onehot = vec![T::zero(); n * c];
    for (i, &y) in labels.iter().enumerate() {
        onehot[i * c + y] = T::one();
    }
    let onehot = tape.constant(Tensor::from_parts(vec![n, c], onehot));
    let target_only = tape.mul(onehot, spread)?;
    let adjusted = tape.add(cos, target_only)?;
    let logits = tape.mul_scalar(adjusted, T::lit(s))?;
    let lsm = tape.log_softmax(logits)?;
    let log_p = tape.gather_rows(lsm, labels)?;
    Ok(tape.neg(log_p)?)
}

/// Additive angular margin loss per sample.
pub fn arcface_per_sample<T: Real>(
    tape: &mut Tape<T>,
    cos: Var,
    labels: &[usize],
    s: f64,
    m: f64,
) -> Result<Var> {
    check_scale(s)?;
    check_margin(m)?;
    margin_softmax_per_sample(tape, cos, labels, s, Margin::Fixed(m))
}

pub fn arcface<T: Real>(tape: &mut Tape<T>, cos: Var, labels: &[usize], s: f64, m: f64) -> Result<Var> {
    let per = arcface_per_sample(tape, cos, labels, s, m)?;
    Ok(tape.mean(per)?)
}

/// Circle loss in pair-similarity form:
/// `log(1 + Σ_n exp(γ·α_n·(s_n − Δ_n)) · Σ_p exp(−γ·α_p·(s_p − Δ_p)))`
/// with `α_p = [1 + m − s_p]₊`, `α_n = [s_n + m]₊`, `Δ_p = 1 − m`, `Δ_n = m`.
///
/// Returns `None` when either similarity set is empty (the loss is then 0).
pub fn circle<T: Real>(
    tape: &mut Tape<T>,
    sim_p: Option<Var>,
    sim_n: Option<Var>,
    m: f64,
    gamma: f64,
) -> Result<Option<Var>> {
    let (Some(sp), Some(sn)) = (sim_p, sim_n) else {
        return Ok(None);
    };
    if !(gamma > 0.0) {
        return Err(LossError::InvalidParam(format!("circle gamma {gamma} must be > 0")));
    }
    for v in [sp, sn] {
        if let Some(&x) = tape.value(v).data().iter().find(|x| x.abs().as_f64() > 1.0 + COS_SLACK) {
            return Err(LossError::CosineOutOfRange { value: x.as_f64() });
        }
    }
    let (g, mt) = (T::lit(gamma), T::lit(m));
    let np = tape.value(sp).len();
    let nn = tape.value(sn).len();

    // positive exponents: −γ·[1 + m − s_p]₊·(s_p − (1 − m))
    let neg_sp = tape.neg(sp)?;
    let ap_raw = tape.add_scalar(neg_sp, T::one() + mt)?;
    let ap = tape.relu(ap_raw)?;
    let dp = tape.add_scalar(sp, mt - T::one())?;
    let lp = tape.mul(ap, dp)?;
    let lp = tape.mul_scalar(lp, -g)?;

    // negative exponents: γ·[s_n + m]₊·(s_n − m)
    let an_raw = tape.add_scalar(sn, mt)?;
    let an = tape.relu(an_raw)?;
    let dn = tape.add_scalar(sn, -mt)?;
    let ln = tape.mul(an, dn)?;
    let ln = tape.mul_scalar(ln, g)?;

    // all pairwise sums ln_i + lp_j, then log(1 + Σ exp) = −log_softmax([0, ...])[0]
    let ln_col = tape.reshape(ln, &[nn, 1])?;
    let lp_row = tape.reshape(lp, &[1, np])?;
    let ones_row = tape.constant(Tensor::ones(&[1, np]));
    let ones_col = tape.constant(Tensor::ones(&[nn, 1]));
    let a = tape.matmul(ln_col, ones_row)?;
    let b = tape.matmul(ones_col, lp_row)?;
    let pairs = tape.add(a, b)?;
    let zero = tape.constant(Tensor::zeros(&[1]));
    let all = tape.concat(&[zero, pairs])?;
    let row = tape.reshape(all, &[1, nn * np + 1])?;
    let lsm = tape.log_softmax(row)?;
    let first = tape.gather(lsm, &[0])?;
    let loss = tape.neg(first)?;
    Ok(Some(tape.reshape(loss, &[1])?))
}

/// Magnitude bounds `(l_a, u_a)` and margin bounds `(l_m, u_m)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MagFaceBounds {
    pub l_a: f64,
    pub u_a: f64,
    pub l_m: f64,
    pub u_m: f64,
}

impl Default for MagFaceBounds {
    fn default() -> Self {
        Self {
            l_a: 10.0,
            u_a: 110.0,
            l_m: 0.45,
            u_m: 0.8,
        }
    }
}

impl MagFaceBounds {
    fn validate(&self) -> Result<()> {
        if !(self.l_a > 0.0 && self.l_a < self.u_a) {
            return Err(LossError::InvalidParam(format!(
                "need 0 < l_a < u_a, got ({}, {})",
                self.l_a, self.u_a
            )));
        }
        if !(self.l_m <= self.u_m) {
            return Err(LossError::InvalidParam(format!(
                "need l_m <= u_m, got ({}, {})",
                self.l_m, self.u_m
            )));
        }
        check_margin(self.l_m)?;
        check_margin(self.u_m)
    }

    /// `l_m + (clamp(a) − l_a)/(u_a − l_a)·(u_m − l_m)`.
    pub fn margin(&self, a: f64) -> f64 {
        let a = a.clamp(self.l_a, self.u_a);
        self.l_m + (a - self.l_a) / (self.u_a - self.l_a) * (self.u_m - self.l_m)
    }
}

/// Per-sample magnitude-aware margins, differentiable in the norms.
pub fn magface_margins<T: Real>(tape: &mut Tape<T>, norms: Var, bounds: &MagFaceBounds) -> Result<Var> {
    // clamp(a, l_a, u_a) = l_a + relu(a − l_a) − relu(a − u_a)
    let lo = tape.add_scalar(norms, T::lit(-bounds.l_a))?;
    let lo = tape.relu(lo)?;
    let hi = tape.add_scalar(norms, T::lit(-bounds.u_a))?;
    let hi = tape.relu(hi)?;
    let offset = tape.sub(lo, hi)?;
    let slope = (bounds.u_m - bounds.l_m) / (bounds.u_a - bounds.l_a);
    let scaled = tape.mul_scalar(offset, T::lit(slope))?;
    Ok(tape.add_scalar(scaled, T::lit(bounds.l_m))?)
}

/// MagFace per sample: ArcFace with margin `m(a_i)` plus `λ_g·g(a_i)`,
/// `g(a) = a/u_a² + 1/a`.
pub fn magface_per_sample<T: Real>(
    tape: &mut Tape<T>,
    cos: Var,
    labels: &[usize],
    norms: Var,
    s: f64,
    bounds: &MagFaceBounds,
    lambda_g: f64,
) -> Result<Var> {
    check_scale(s)?;
    bounds.validate()?;
    let (n, _) = cos_dims(tape, cos)?;
    let norm_vals = tape.value(norms);
    if norm_vals.len() != n {
        return Err(TensorError::ShapeMismatch {
            op: "magface",
            detail: format!("{} norms for {n} samples", norm_vals.len()),
        }
        .into());
    }
    if let Some(index) = norm_vals.data().iter().position(|&a| a <= T::zero()) {
        return Err(LossError::NonPositiveNorm { index });
    }
    let norms = tape.reshape(norms, &[n])?;
    let margins = magface_margins(tape, norms, bounds)?;
    let arc = margin_softmax_per_sample(tape, cos, labels, s, Margin::PerSample(margins))?;
    if lambda_g == 0.0 {
        return Ok(arc);
    }
    let lin = tape.mul_scalar(norms, T::lit(1.0 / (bounds.u_a * bounds.u_a)))?;
    let inv = tape.pow_scalar(norms, -T::one())?;
    let g = tape.add(lin, inv)?;
    let reg = tape.mul_scalar(g, T::lit(lambda_g))?;
    Ok(tape.add(arc, reg)?)
}

pub fn magface<T: Real>(
    tape: &mut Tape<T>,
    cos: Var,
    labels: &[usize],
    norms: Var,
    s: f64,
    bounds: &MagFaceBounds,
    lambda_g: f64,
) -> Result<Var> {
    let per = magface_per_sample(tape, cos, labels, norms, s, bounds, lambda_g)?;
    Ok(tape.mean(per)?)
}
