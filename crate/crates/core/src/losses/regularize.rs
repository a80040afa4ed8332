use super::{LossError, Result};
use crate::autodiff::{Tape, Var};
use crate::scalar::Real;

/// Indices of the `⌈ratio·N⌉` largest losses, largest first (ties: lower index first).
pub fn ohem_select<T: Real>(losses: &[T], ratio: f64) -> Result<Vec<usize>> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(LossError::InvalidParam(format!("ohem ratio {ratio} not in (0, 1]")));
    }
    let keep = ((ratio * losses.len() as f64).ceil() as usize).clamp(1, losses.len());
    let mut order: Vec<usize> = (0..losses.len()).collect();
    order.sort_by(|&a, &b| losses[b].partial_cmp(&losses[a]).expect("finite losses").then(a.cmp(&b)));
    order.truncate(keep);
    Ok(order)
}

/// Mean of the hardest `⌈ratio·N⌉` per-sample losses; only those receive gradient.
pub fn ohem_filter<T: Real>(tape: &mut Tape<T>, per_sample: Var, ratio: f64) -> Result<Var> {
    if ratio == 1.0 {
        return Ok(tape.mean(per_sample)?);
    }
    let picked = ohem_select(tape.value(per_sample).data(), ratio)?;
    let hard = tape.gather(per_sample, &picked)?;
    Ok(tape.mean(hard)?)
}

/// `λ·y1 + (1 − λ)·y2` for one-hot (or soft) targets of equal length.
pub fn mixup_targets<T: Real>(y1: &[T], y2: &[T], lambda: f64) -> Result<Vec<T>> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(LossError::InvalidParam(format!("mixup lambda {lambda} not in [0, 1]")));
    }
    if y1.len() != y2.len() {
        return Err(LossError::InvalidParam(format!(
            "mixup targets differ in length ({} vs {})",
            y1.len(),
            y2.len()
        )));
    }
    let (a, b) = (T::lit(lambda), T::lit(1.0 - lambda));
    Ok(y1.iter().zip(y2).map(|(&p, &q)| a * p + b * q).collect())
}
