//! Test-client evaluation under each BN strategy.

use crate::bn_strategy::{adabn_recalibrate, materialize_client_model, BnStrategy, PrivateStore};
use crate::data::{Batch, ClientDataset};
use crate::error::Result;
use crate::metrics::ConfusionMatrix;
use crate::model::{GroupKind, ModelState};
use crate::nn::SegNet;
use crate::tensor::Tensor4;

use super::local::batch_ranges;

/// Per-pixel argmax over the class axis.
pub fn argmax_labels(logits: &Tensor4) -> Vec<u8> {
    let [b, c, h, w] = logits.shape();
    let plane = h * w;
    let mut out = vec![0u8; b * plane];
    for n in 0..b {
        for p in 0..plane {
            let mut best = 0;
            let mut best_v = f64::NEG_INFINITY;
            for k in 0..c {
                let v = logits.data()[(n * c + k) * plane + p];
                if v > best_v {
                    best_v = v;
                    best = k;
                }
            }
            out[n * plane + p] = best as u8;
        }
    }
    out
}

/// Eval-mode confusion matrix of `model` over the images `indices` of `client`.
pub fn confusion(
    net: &SegNet,
    model: &ModelState,
    client: &ClientDataset,
    indices: &[usize],
    batch_size: usize,
) -> Result<ConfusionMatrix> {
    let mut cm = ConfusionMatrix::new(net.config().num_classes);
    for (s, e) in batch_ranges(indices.len(), batch_size) {
        let idx = &indices[s..e];
        let batch = Batch::from_pairs(idx.iter().map(|&i| (&client.images[i], &client.masks[i])))?;
        let logits = net.predict(model, &batch.images)?;
        cm.accumulate(&argmax_labels(&logits), &batch.labels)?;
    }
    Ok(cm)
}

/// Unlabeled recalibration batches drawn in order from the given images.
pub fn adabn_batches(client: &ClientDataset, indices: &[usize], batch_size: usize) -> Result<Vec<Tensor4>> {
    batch_ranges(indices.len(), batch_size)
        .into_iter()
        .map(|(s, e)| Batch::images_only(indices[s..e].iter().map(|&i| &client.images[i])))
        .collect()
}

fn mean_private(store: &PrivateStore, init: &ModelState, kind: GroupKind) -> ModelState {
    let mut out = init.clone();
    let ids: Vec<usize> = store.client_ids().collect();
    if ids.is_empty() {
        return out;
    }
    for name in init.names_of_kind(kind) {
        let mut acc = vec![0.0; init.get(&name).expect("listed").len()];
        let mut count = 0.0;
        for id in &ids {
            if let Some(v) = store.get(*id).and_then(|m| m.get(&name)) {
                acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
                count += 1.0;
            }
        }
        if count > 0.0 {
            acc.iter_mut().for_each(|a| *a /= count);
            out.set(&name, &acc).expect("same shape");
        }
    }
    out
}

pub struct EvalContext<'a> {
    pub net: &'a SegNet,
    pub strategy: BnStrategy,
    pub global: &'a ModelState,
    pub store: &'a PrivateStore,
    pub init: &'a ModelState,
    pub train: &'a [ClientDataset],
    pub batch_size: usize,
}

impl EvalContext<'_> {
    fn full_model(&self, client_id: usize) -> Result<ModelState> {
        materialize_client_model(self.strategy, self.global, self.store, client_id, self.init)
    }

    fn recalibrated(&self, base: &ModelState, client: &ClientDataset, indices: &[usize]) -> Result<ModelState> {
        adabn_recalibrate(self.net, base, &adabn_batches(client, indices, self.batch_size)?)
    }

    /// Seen-domain test client. FedBN evaluates each domain's images with the
    /// private layers of the lowest-id training client holding that domain.
    pub fn seen(&self, client: &ClientDataset) -> Result<ConfusionMatrix> {
        let all: Vec<usize> = (0..client.len()).collect();
        match self.strategy {
            BnStrategy::ShareAll => confusion(self.net, self.global, client, &all, self.batch_size),
            BnStrategy::SiloBn => {
                let model = self.recalibrated(&self.full_model(usize::MAX)?, client, &all)?;
                confusion(self.net, &model, client, &all, self.batch_size)
            }
            BnStrategy::FedBn => {
                let mut cm = ConfusionMatrix::new(self.net.config().num_classes);
                for d in client.domain_set() {
                    let idx: Vec<usize> = (0..client.len()).filter(|&i| client.domains[i] == d).collect();
                    let owner = self
                        .train
                        .iter()
                        .filter(|c| c.domains.contains(&d))
                        .map(|c| c.client_id)
                        .min()
                        .unwrap_or(usize::MAX);
                    let model = self.full_model(owner)?;
                    cm.merge(&confusion(self.net, &model, client, &idx, self.batch_size)?)?;
                }
                Ok(cm)
            }
        }
    }

    /// Held-out-domain test client. FedBN has no model for an unseen domain
    /// unless `fedbn_adabn`: then the mean of the clients' private affine
    /// parameters is combined with AdaBN statistics.
    pub fn unseen(&self, client: &ClientDataset, fedbn_adabn: bool) -> Result<Option<ConfusionMatrix>> {
        let all: Vec<usize> = (0..client.len()).collect();
        let model = match self.strategy {
            BnStrategy::ShareAll => self.global.clone(),
            BnStrategy::SiloBn => self.recalibrated(&self.full_model(usize::MAX)?, client, &all)?,
            BnStrategy::FedBn if fedbn_adabn => {
                let base = mean_private(self.store, &self.full_model(usize::MAX)?, GroupKind::BnAffine);
                self.recalibrated(&base, client, &all)?
            }
            BnStrategy::FedBn => return Ok(None),
        };
        confusion(self.net, &model, client, &all, self.batch_size).map(Some)
    }
}
