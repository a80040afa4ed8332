use super::{BaseOptimizer, LrScale, OptimError, OptimState};
use crate::model::{ModelParams, ParamMap};
use crate::scalar::Real;

/// Euclidean norm over every gradient entry of every parameter.
pub fn global_norm<T: Real>(grads: &ParamMap<T>) -> T {
    grads
        .values()
        .flat_map(|g| g.data().iter())
        .fold(T::zero(), |acc, &v| acc + v * v)
        .sqrt()
}

/// Sharpness-aware step.
///
/// `loss_fn` returns the loss and its gradients at the given parameters.
/// The gradient `g` at `p` defines the perturbation `ε̂ = ρ·g/‖g‖`; the base
/// optimizer is then applied at `p` with the gradient taken at `p + ε̂`.
/// With `ρ = 0` or `‖g‖ = 0` this is exactly the base step. Returns the loss
/// at the unperturbed point.
pub fn sam_step<T, E, F>(
    params: &mut ModelParams<T>,
    mut loss_fn: F,
    base: &BaseOptimizer,
    rho: f64,
    state: &mut OptimState<T>,
    lr: f64,
    scale: &LrScale,
) -> Result<T, E>
where
    T: Real,
    E: From<OptimError>,
    F: FnMut(&ModelParams<T>) -> Result<(T, ParamMap<T>), E>,
{
    if !(rho >= 0.0) {
        return Err(OptimError::Invalid(format!("sam rho {rho} must be >= 0")).into());
    }
    let (loss, grads) = loss_fn(params)?;
    let norm = global_norm(&grads);
    if rho == 0.0 || norm == T::zero() {
        base.step(params, &grads, state, lr, scale)?;
        return Ok(loss);
    }
    let factor = T::lit(rho) / norm;
    let mut perturbed = params.clone();
    for (name, p) in perturbed.iter_mut() {
        let g = grads
            .get(&name)
            .ok_or_else(|| OptimError::MissingGrad(name.clone()))?;
        for (pv, &gv) in p.data_mut().iter_mut().zip(g.data()) {
            *pv += factor * gv;
        }
    }
    let (_, sharp_grads) = loss_fn(&perturbed)?;
    base.step(params, &sharp_grads, state, lr, scale)?;
    Ok(loss)
}
