#![allow(dead_code)]

use feddrive::loss::ohem_ce_loss;
use feddrive::model::{ModelConfig, ModelState};
use feddrive::nn::{Mode, SegNet};
use feddrive::tensor::Tensor4;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_batch(cfg: &ModelConfig, batch: usize, seed: u64) -> (Tensor4, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = batch * 3 * cfg.height * cfg.width;
    let images = Tensor4::from_vec(
        [batch, 3, cfg.height, cfg.width],
        (0..n).map(|_| rng.random::<f64>()).collect(),
    )
    .unwrap();
    let labels = (0..batch * cfg.height * cfg.width)
        .map(|_| rng.random_range(0..cfg.num_classes as u8))
        .collect();
    (images, labels)
}

/// Loss of a train-mode forward pass (batch statistics) on a throwaway copy.
pub fn train_loss(net: &SegNet, model: &ModelState, images: &Tensor4, labels: &[u8], keep: f64) -> f64 {
    let mut m = model.clone();
    let (logits, _) = net.forward(&mut m, images, Mode::Train).unwrap();
    ohem_ce_loss(&logits, labels, keep).unwrap().0
}

/// Central finite difference of the loss with respect to one parameter.
pub fn central_difference(
    net: &SegNet,
    model: &ModelState,
    group: &str,
    index: usize,
    h: f64,
    images: &Tensor4,
    labels: &[u8],
    keep: f64,
) -> f64 {
    let mut plus = model.clone();
    plus.get_mut(group).unwrap()[index] += h;
    let mut minus = model.clone();
    minus.get_mut(group).unwrap()[index] -= h;
    (train_loss(net, &plus, images, labels, keep) - train_loss(net, &minus, images, labels, keep)) / (2.0 * h)
}

/// |a - n| / max(|a|, |n|, floor)
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

use feddrive::config::ExperimentConfig;
use feddrive::synth::{make_split, FederatedData, SplitMode};

/// A federation small enough for second-scale runs.
pub fn tiny_config(clients: usize, per_round: usize, rounds: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.federation.clients_per_round = per_round;
    cfg.federation.rounds = rounds;
    cfg.federation.eval_every = 1;
    cfg.federation.local_epochs = 1;
    cfg.data.num_clients = clients;
    cfg.data.samples_per_client = 4;
    cfg.data.test_samples = 4;
    cfg.data.height = 16;
    cfg.data.width = 16;
    cfg.data.mode = SplitMode::Heterogeneous;
    cfg.model.batch_size = 4;
    cfg
}

pub fn data_for(cfg: &ExperimentConfig) -> FederatedData {
    make_split(&cfg.split_config(), cfg.data_seed()).unwrap()
}
