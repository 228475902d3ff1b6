//! Which parameter groups leave the client, and test-time BN recalibration.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container::{self, Record};
use crate::error::{Error, Result};
use crate::model::{bn_stat_name, GroupKind, ModelState};
use crate::nn::SegNet;
use crate::tensor::Tensor4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BnStrategy {
    /// Plain FedAvg: every group is shared.
    #[serde(alias = "fedavg")]
    ShareAll,
    /// Whole BN layers (affine and statistics) stay on the client.
    #[serde(alias = "fedbn")]
    FedBn,
    /// Only the BN statistics stay on the client.
    #[serde(alias = "silobn")]
    SiloBn,
}

impl BnStrategy {
    pub fn private_kinds(self) -> &'static [GroupKind] {
        match self {
            BnStrategy::ShareAll => &[],
            BnStrategy::FedBn => &[GroupKind::BnAffine, GroupKind::BnStat],
            BnStrategy::SiloBn => &[GroupKind::BnStat],
        }
    }

    pub fn is_private(self, kind: GroupKind) -> bool {
        self.private_kinds().contains(&kind)
    }

    pub fn label(self) -> &'static str {
        match self {
            BnStrategy::ShareAll => "FedAvg",
            BnStrategy::FedBn => "FedBN",
            BnStrategy::SiloBn => "SiloBN",
        }
    }
}

/// Splits a model into the part sent to the server and the part kept locally.
pub fn split(strategy: BnStrategy, model: &ModelState) -> (ModelState, ModelState) {
    let mut shared = ModelState::new();
    let mut private = ModelState::new();
    for (name, g) in model.iter() {
        let dst = if strategy.is_private(g.kind) { &mut private } else { &mut shared };
        dst.insert(name.to_string(), g.kind, g.data.clone());
    }
    (shared, private)
}

/// Inverse of [`split`]. Fails if a group name appears in both parts.
pub fn combine(a: &ModelState, b: &ModelState) -> Result<ModelState> {
    let mut out = a.clone();
    for (name, g) in b.iter() {
        if out.get(name).is_some() {
            return Err(Error::Consistency(format!("group {name:?} present in both parts")));
        }
        out.insert(name.to_string(), g.kind, g.data.clone());
    }
    Ok(out)
}

/// Client-local groups retained between rounds, keyed by client id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PrivateStore {
    clients: BTreeMap<usize, ModelState>,
}

impl PrivateStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, client_id: usize) -> Option<&ModelState> {
        self.clients.get(&client_id)
    }

    /// Records a client's private part. Empty parts (ShareAll) are not stored.
    pub fn put(&mut self, client_id: usize, private: ModelState) {
        if !private.is_empty() {
            self.clients.insert(client_id, private);
        }
    }

    pub fn client_ids(&self) -> impl Iterator<Item = usize> + '_ {
        self.clients.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.clients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clients.is_empty()
    }

    /// One record per (client, group), named `"{client_id}/{group}"`.
    pub fn to_records(&self) -> Vec<Record> {
        self.clients
            .iter()
            .flat_map(|(id, m)| {
                m.iter().map(move |(name, g)| Record {
                    name: format!("{id}/{name}"),
                    kind: g.kind.code(),
                    data: g.data.clone(),
                })
            })
            .collect()
    }

    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut store = Self::new();
        for r in records {
            let (id, name) = r
                .name
                .split_once('/')
                .and_then(|(id, n)| Some((id.parse::<usize>().ok()?, n.to_string())))
                .ok_or_else(|| Error::Consistency(format!("bad private record name {:?}", r.name)))?;
            let kind = GroupKind::from_code(r.kind)
                .ok_or_else(|| Error::Consistency(format!("unknown kind byte {}", r.kind)))?;
            store.clients.entry(id).or_default().insert(name, kind, r.data);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_file(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(container::read_file(path)?)
    }
}

/// Builds the model a client starts a round from: shared groups from the
/// server, private groups from the client's store entry, falling back to the
/// initial values on first participation.
pub fn materialize_client_model(
    strategy: BnStrategy,
    global: &ModelState,
    store: &PrivateStore,
    client_id: usize,
    init: &ModelState,
) -> Result<ModelState> {
    let own = store.get(client_id);
    let mut out = ModelState::new();
    for (name, g) in init.iter() {
        let src = if strategy.is_private(g.kind) {
            own.and_then(|m| m.get(name)).unwrap_or(&g.data)
        } else {
            global
                .get(name)
                .ok_or_else(|| Error::Consistency(format!("global model lacks shared group {name:?}")))?
        };
        if src.len() != g.data.len() {
            return Err(Error::Consistency(format!(
                "group {name:?}: expected {} values, found {}",
                g.data.len(),
                src.len()
            )));
        }
        out.insert(name.to_string(), g.kind, src.to_vec());
    }
    Ok(out)
}

/// AdaBN: replaces every BN layer's running statistics with the plain mean of
/// the per-batch statistics over `batches`; all other groups are copied
/// unchanged.
pub fn adabn_recalibrate(net: &SegNet, model: &ModelState, batches: &[Tensor4]) -> Result<ModelState> {
    if batches.is_empty() {
        return Err(Error::Argument("AdaBN needs at least one batch".into()));
    }
    let per_batch = batches
        .iter()
        .map(|b| net.batch_statistics(model, b))
        .collect::<Result<Vec<_>>>()?;
    let inv = 1.0 / batches.len() as f64;
    let mut out = model.clone();
    for layer in 0..per_batch[0].len() {
        let channels = per_batch[0][layer].0.len();
        let mut stat = vec![0.0; 2 * channels];
        for stats in &per_batch {
            let (mean, var) = &stats[layer];
            for c in 0..channels {
                stat[c] += mean[c];
                stat[channels + c] += var[c];
            }
        }
        stat.iter_mut().for_each(|v| *v *= inv);
        out.set(&bn_stat_name(layer), &stat)?;
    }
    Ok(out)
}
