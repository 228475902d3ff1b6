//! Cross-entropy with online hard example mining.

use std::cmp::Ordering;

use crate::data::IGNORE_INDEX;
use crate::error::{Error, Result};
use crate::tensor::Tensor4;

/// Per-pixel cross-entropy restricted to the hardest `keep_fraction` of the
/// labeled pixels in the whole batch.
///
/// Keeps the top `ceil(keep_fraction * P)` pixels by loss, ties resolved
/// toward the lowest flat pixel index. Returns the mean loss over the kept
/// pixels and its gradient w.r.t. the logits (zero on dropped pixels).
pub fn ohem_ce_loss(logits: &Tensor4, labels: &[u8], keep_fraction: f64) -> Result<(f64, Tensor4)> {
    if !(keep_fraction > 0.0 && keep_fraction <= 1.0) {
        return Err(Error::Argument(format!("keep_fraction {keep_fraction} outside (0, 1]")));
    }
    let [b, c, h, w] = logits.shape();
    let plane = h * w;
    if labels.len() != b * plane {
        return Err(Error::Dimension(format!(
            "{} labels for logits of shape {:?}",
            labels.len(),
            logits.shape()
        )));
    }
    let z = logits.data();
    // (loss, flat pixel index)
    let mut losses: Vec<(f64, usize)> = Vec::with_capacity(labels.len());
    for (idx, &label) in labels.iter().enumerate() {
        if label == IGNORE_INDEX {
            continue;
        }
        if label as usize >= c {
            return Err(Error::Argument(format!("label {label} with only {c} classes")));
        }
        let (bi, p) = (idx / plane, idx % plane);
        let base = bi * c * plane + p;
        let max = (0..c).map(|k| z[base + k * plane]).fold(f64::NEG_INFINITY, f64::max);
        let lse = max + (0..c).map(|k| (z[base + k * plane] - max).exp()).sum::<f64>().ln();
        losses.push((lse - z[base + label as usize * plane], idx));
    }
    if losses.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let total = losses.len();
    let keep = ((keep_fraction * total as f64).ceil() as usize).clamp(1, total);
    let order = |a: &(f64, usize), b: &(f64, usize)| -> Ordering { b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)) };
    if keep < total {
        losses.select_nth_unstable_by(keep - 1, order);
        losses.truncate(keep);
    }
    losses.sort_unstable_by_key(|&(_, idx)| idx);

    let mut grad = Tensor4::zeros(logits.shape());
    let g = grad.data_mut();
    let inv = 1.0 / keep as f64;
    let mut sum = 0.0;
    for &(loss, idx) in &losses {
        sum += loss;
        let (bi, p) = (idx / plane, idx % plane);
        let base = bi * c * plane + p;
        let max = (0..c).map(|k| z[base + k * plane]).fold(f64::NEG_INFINITY, f64::max);
        let denom: f64 = (0..c).map(|k| (z[base + k * plane] - max).exp()).sum();
        for k in 0..c {
            g[base + k * plane] = (z[base + k * plane] - max).exp() / denom * inv;
        }
        g[base + labels[idx] as usize * plane] -= inv;
    }
    Ok((sum * inv, grad))
}
