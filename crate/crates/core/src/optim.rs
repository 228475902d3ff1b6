//! Client-side optimization: polynomial learning-rate decay and momentum SGD.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::model::ModelState;
use crate::nn::Gradients;

/// `base_lr * (1 - iter / max_iter)^power`.
pub fn poly_lr(base_lr: f64, iter: usize, max_iter: usize, power: f64) -> Result<f64> {
    if !(base_lr > 0.0) {
        return Err(Error::Argument(format!("base_lr must be positive, got {base_lr}")));
    }
    if max_iter == 0 {
        return Err(Error::Argument("max_iter must be positive".into()));
    }
    if iter > max_iter {
        return Err(Error::Range(format!("iteration {iter} beyond max_iter {max_iter}")));
    }
    Ok(base_lr * (1.0 - iter as f64 / max_iter as f64).powf(power))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdParams {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdParams {
    fn default() -> Self {
        Self {
            momentum: 0.9,
            weight_decay: 0.0005,
        }
    }
}

/// Momentum buffers keyed by group name; created lazily at zero.
pub type Velocity = BTreeMap<String, Vec<f64>>;

/// `v <- momentum * v + (grad + weight_decay * param)`, `param <- param - lr * v`
/// on every weight and BN-affine group. Running statistics are left alone.
pub fn sgd_step(
    model: &mut ModelState,
    grads: &Gradients,
    lr: f64,
    params: SgdParams,
    velocity: &mut Velocity,
) -> Result<()> {
    let trainable: Vec<String> = model
        .iter()
        .filter(|(_, g)| g.kind.is_trainable())
        .map(|(n, _)| n.to_string())
        .collect();
    if trainable.len() != grads.len() || trainable.iter().any(|n| !grads.contains_key(n)) {
        let missing: Vec<&String> = trainable.iter().filter(|n| !grads.contains_key(*n)).collect();
        return Err(Error::Consistency(format!(
            "gradients must cover exactly the trainable groups; missing {missing:?}, got {} for {} groups",
            grads.len(),
            trainable.len()
        )));
    }
    for name in &trainable {
        let g = &grads[name];
        let p = model.get_mut(name).expect("listed above");
        if g.len() != p.len() {
            return Err(Error::Consistency(format!(
                "gradient for {name:?} has {} values, parameter has {}",
                g.len(),
                p.len()
            )));
        }
        let v = velocity.entry(name.clone()).or_insert_with(|| vec![0.0; p.len()]);
        for ((pi, vi), gi) in p.iter_mut().zip(v.iter_mut()).zip(g) {
            *vi = params.momentum * *vi + (gi + params.weight_decay * *pi);
            *pi -= lr * *vi;
        }
    }
    Ok(())
}
