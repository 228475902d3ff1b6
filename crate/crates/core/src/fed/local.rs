//! Client-side training for one round.

use rand::seq::SliceRandom;

use crate::data::{Batch, ClientDataset};
use crate::error::{Error, Result};
use crate::loss::ohem_ce_loss;
use crate::model::ModelState;
use crate::nn::{Mode, SegNet};
use crate::optim::{poly_lr, sgd_step, SgdParams, Velocity};
use crate::rng::{keyed, mix, Stream};
use crate::style::{apply_style_policy, StyleBanks, StyleMethod, StylePolicy};
use crate::synth::augment_train;

#[derive(Debug, Clone, PartialEq)]
pub struct LocalTrainConfig {
    pub epochs: usize,
    /// Total rounds T; the learning rate decays over `T * epochs` epochs.
    pub total_rounds: usize,
    pub base_lr: f64,
    pub lr_power: f64,
    pub batch_size: usize,
    pub ohem_fraction: f64,
    pub sgd: SgdParams,
    pub augment: bool,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy)]
pub struct StyleContext<'a> {
    pub banks: &'a StyleBanks,
    pub policy: &'a StylePolicy,
}

/// Appends a horizontally flipped copy of every image when the client holds
/// fewer images than one batch.
pub fn flip_double(client: &ClientDataset, batch_size: usize) -> ClientDataset {
    if client.len() >= batch_size {
        return client.clone();
    }
    let mut out = client.clone();
    out.images.extend(client.images.iter().map(|i| i.flipped()));
    out.masks.extend(client.masks.iter().map(|m| m.flipped()));
    out.domains.extend_from_slice(&client.domains);
    out
}

/// Consecutive `[start, end)` ranges of at most `batch_size`; a trailing
/// single-image batch is merged into the previous one because train-mode BN
/// needs two images.
pub fn batch_ranges(n: usize, batch_size: usize) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = (0..n)
        .step_by(batch_size.max(1))
        .map(|s| (s, (s + batch_size).min(n)))
        .collect();
    if out.len() > 1 && out.last().is_some_and(|&(s, e)| e - s == 1) {
        let (_, e) = out.pop().expect("non-empty");
        out.last_mut().expect("non-empty").1 = e;
    }
    out
}

/// Permutation of `0..n` for one epoch of one client.
pub fn epoch_order(seed: u64, client_id: usize, global_epoch: usize, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut keyed(Stream::Shuffle, &[seed, client_id as u64, global_epoch as u64]));
    order
}

pub fn style_seed(seed: u64, client_id: usize, global_epoch: usize) -> u64 {
    mix(Stream::Style, &[seed, client_id as u64, global_epoch as u64])
}

pub fn augment_seed(seed: u64, client_id: usize, global_epoch: usize, index: usize) -> u64 {
    mix(Stream::Augment, &[seed, client_id as u64, global_epoch as u64, index as u64])
}

/// Runs `epochs` passes over the client's data starting from `model` and
/// returns the trained model with the mean OHEM loss over all batches.
/// Global epoch `round * epochs + e` keys every random choice and sets the
/// learning rate. Momentum starts from zero each call.
pub fn local_train(
    net: &SegNet,
    client: &ClientDataset,
    model: &ModelState,
    cfg: &LocalTrainConfig,
    round: usize,
    style: Option<StyleContext<'_>>,
) -> Result<(ModelState, f64)> {
    if client.is_empty() {
        return Err(Error::Argument(format!("client {} has no images", client.client_id)));
    }
    if cfg.epochs == 0 || round >= cfg.total_rounds {
        return Err(Error::Argument(format!(
            "round {round} with {} epochs outside a {}-round schedule",
            cfg.epochs, cfg.total_rounds
        )));
    }
    let base = flip_double(client, cfg.batch_size);
    let batch_size = cfg.batch_size.min(base.len());
    let max_iter = cfg.total_rounds * cfg.epochs;
    let mut model = model.clone();
    let mut velocity = Velocity::new();
    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for e in 0..cfg.epochs {
        let g = round * cfg.epochs + e;
        let lr = if cfg.base_lr == 0.0 {
            0.0
        } else {
            poly_lr(cfg.base_lr, g, max_iter, cfg.lr_power)?
        };
        let styled;
        let data = match style {
            Some(s) if s.policy.method != StyleMethod::None => {
                styled = apply_style_policy(&base, s.banks, s.policy, style_seed(cfg.seed, client.client_id, g))?;
                &styled
            }
            _ => &base,
        };
        let order = epoch_order(cfg.seed, client.client_id, g, data.len());
        for (s, t) in batch_ranges(order.len(), batch_size) {
            let pairs: Vec<_> = order[s..t]
                .iter()
                .map(|&i| {
                    if cfg.augment {
                        augment_train(&data.images[i], &data.masks[i], augment_seed(cfg.seed, client.client_id, g, i))
                    } else {
                        (data.images[i].clone(), data.masks[i].clone())
                    }
                })
                .collect();
            let batch = Batch::from_pairs(pairs.iter().map(|(a, b)| (a, b)))?;
            let (logits, cache) = net.forward(&mut model, &batch.images, Mode::Train)?;
            let (loss, dlogits) = match ohem_ce_loss(&logits, &batch.labels, cfg.ohem_fraction) {
                Ok(v) => v,
                // every pixel of the batch cropped away
                Err(Error::EmptyBatch) => continue,
                Err(e) => return Err(e),
            };
            let grads = net.backward(&model, &cache, &dlogits)?;
            sgd_step(&mut model, &grads, lr, cfg.sgd, &mut velocity)?;
            if !loss.is_finite() || !model.all_finite() {
                return Err(Error::Numeric(format!(
                    "client {} diverged in epoch {g}",
                    client.client_id
                )));
            }
            loss_sum += loss;
            batches += 1;
        }
    }
    Ok((model, if batches == 0 { 0.0 } else { loss_sum / batches as f64 }))
}
