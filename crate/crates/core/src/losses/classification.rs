use super::{check_labels, LossError, Result};
use crate::autodiff::{Tape, Var};
use crate::scalar::Real;
use crate::tensor::{Tensor, TensorError};

fn logits_dims<T: Real>(tape: &Tape<T>, logits: Var) -> Result<(usize, usize)> {
    match *tape.shape(logits) {
        [n, c] => Ok((n, c)),
        ref s => Err(TensorError::ShapeMismatch {
            op: "logits",
            detail: format!("expected [N, C], got {s:?}"),
        }
        .into()),
    }
}

/// `(1 - ε)·onehot(y) + ε/C` as an `[N, C]` tensor.
pub fn smoothed_targets<T: Real>(labels: &[usize], classes: usize, eps_smooth: f64) -> Result<Tensor<T>> {
    if !(0.0..1.0).contains(&eps_smooth) {
        return Err(LossError::InvalidParam(format!("eps_smooth {eps_smooth} not in [0, 1)")));
    }
    check_labels(labels, labels.len(), classes)?;
    let off = T::lit(eps_smooth / classes as f64);
    let on = T::lit(1.0 - eps_smooth) + off;
    let mut data = vec![off; labels.len() * classes];
    for (i, &y) in labels.iter().enumerate() {
        data[i * classes + y] = on;
    }
    Ok(Tensor::from_parts(vec![labels.len(), classes], data))
}

/// Per-row `-Σ_c t_c · log softmax(logits)_c` against soft targets `[N, C]`.
pub fn soft_cross_entropy_per_sample<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    targets: &Tensor<T>,
) -> Result<Var> {
    logits_dims(tape, logits)?;
    let t = tape.constant(targets.clone());
    let lsm = tape.log_softmax(logits)?;
    let weighted = tape.mul(t, lsm)?;
    let rows = tape.sum_rows(weighted)?;
    Ok(tape.neg(rows)?)
}

/// Cross-entropy per sample, with optional label smoothing.
pub fn cross_entropy_per_sample<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    labels: &[usize],
    eps_smooth: f64,
) -> Result<Var> {
    let (n, c) = logits_dims(tape, logits)?;
    check_labels(labels, n, c)?;
    let targets = smoothed_targets(labels, c, eps_smooth)?;
    soft_cross_entropy_per_sample(tape, logits, &targets)
}

/// Mean cross-entropy `-(1/N) Σ log ŷ_{i, y_i}` (smoothed when `eps_smooth > 0`).
pub fn cross_entropy<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    labels: &[usize],
    eps_smooth: f64,
) -> Result<Var> {
    let per = cross_entropy_per_sample(tape, logits, labels, eps_smooth)?;
    Ok(tape.mean(per)?)
}

/// Focal loss per sample: `-(1 - p_t)^γ · log p_t`.
pub fn focal_per_sample<T: Real>(
    tape: &mut Tape<T>,
    logits: Var,
    labels: &[usize],
    gamma: f64,
) -> Result<Var> {
    if !(gamma >= 0.0) {
        return Err(LossError::InvalidParam(format!("gamma {gamma} must be >= 0")));
    }
    let (n, c) = logits_dims(tape, logits)?;
    check_labels(labels, n, c)?;
    let lsm = tape.log_softmax(logits)?;
    let log_pt = tape.gather_rows(lsm, labels)?;
    let nll = tape.neg(log_pt)?;
    if gamma == 0.0 {
        return Ok(nll);
    }
    let pt = tape.exp(log_pt)?;
    let neg_pt = tape.neg(pt)?;
    let one_minus = tape.add_scalar(neg_pt, T::one())?;
    let modulating = tape.pow_scalar(one_minus, T::lit(gamma))?;
    Ok(tape.mul(modulating, nll)?)
}

pub fn focal<T: Real>(tape: &mut Tape<T>, logits: Var, labels: &[usize], gamma: f64) -> Result<Var> {
    let per = focal_per_sample(tape, logits, labels, gamma)?;
    Ok(tape.mean(per)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eval(f: impl FnOnce(&mut Tape, Var) -> Result<Var>, shape: &[usize], logits: &[f64]) -> Result<f64> {
        let mut tape = Tape::new();
        let x = tape.leaf(Tensor::from_f64(shape.to_vec(), logits).unwrap());
        let out = f(&mut tape, x)?;
        Ok(tape.value(out).item().unwrap())
    }

    #[test]
    fn ce_uniform_logits() {
        let v = eval(|t, x| cross_entropy(t, x, &[2], 0.0), &[1, 4], &[0.3; 4]).unwrap();
        assert!((v - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn ce_large_margin_tends_to_zero() {
        let v = eval(|t, x| cross_entropy(t, x, &[0], 0.0), &[1, 3], &[500., 0., 0.]).unwrap();
        assert!((0.0..1e-200).contains(&v));
    }

    #[test]
    fn ce_label_smoothing_value() {
        // -Σ t·log softmax([1,2,3]) with t = (ε/3, ε/3, 1-ε+ε/3), ε=0.1
        let v = eval(|t, x| cross_entropy(t, x, &[2], 0.1), &[1, 3], &[1., 2., 3.]).unwrap();
        assert!((v - 0.507_605_964_444_380_6).abs() < 1e-12, "{v}");
    }

    #[test]
    fn ce_rejects_bad_label() {
        let err = eval(|t, x| cross_entropy(t, x, &[3], 0.0), &[1, 3], &[0.; 3]).unwrap_err();
        assert_eq!(err, LossError::LabelOutOfRange { label: 3, classes: 3 });
        let err = eval(|t, x| focal(t, x, &[5], 2.0), &[1, 3], &[0.; 3]).unwrap_err();
        assert_eq!(err, LossError::LabelOutOfRange { label: 5, classes: 3 });
    }

    #[test]
    fn focal_examples() {
        let logits = [0.2, -1.0, 0.7, 1.5, 0.0, -0.3];
        let f0 = eval(|t, x| focal(t, x, &[1, 0], 0.0), &[2, 3], &logits).unwrap();
        let ce = eval(|t, x| cross_entropy(t, x, &[1, 0], 0.0), &[2, 3], &logits).unwrap();
        assert!((f0 - ce).abs() < 1e-12);
        // p_t = 0.5 with two equal logits
        let v = eval(|t, x| focal(t, x, &[0], 2.0), &[1, 2], &[0.0, 0.0]).unwrap();
        assert!((v - 0.25 * 2f64.ln()).abs() < 1e-12);
        let v = eval(|t, x| focal(t, x, &[0], 2.0), &[1, 2], &[800.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
    }
}
