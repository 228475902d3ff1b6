mod common;

use common::{data_for, random_batch, tiny_config};
use feddrive::bn_strategy::{adabn_recalibrate, split, BnStrategy};
use feddrive::fed::{run_experiment, Hooks, Upload};
use feddrive::model::{bn_stat_name, conv_name, GroupKind, ModelConfig, ModelState};
use feddrive::nn::SegNet;
use feddrive::tensor::Tensor4;

fn small_model() -> (ModelConfig, SegNet, ModelState) {
    let cfg = ModelConfig {
        height: 8,
        width: 8,
        ..ModelConfig::default()
    };
    let net = SegNet::new(&cfg).unwrap();
    let model = ModelState::init(&cfg, 3);
    (cfg, net, model)
}

#[test]
fn recalibration_freezes_everything_but_statistics() {
    let (cfg, net, model) = small_model();
    let (x, _) = random_batch(&cfg, 4, 1);
    let out = adabn_recalibrate(&net, &model, &[x]).unwrap();
    for (name, g) in model.iter() {
        if g.kind == GroupKind::BnStat {
            assert_ne!(out.get(name).unwrap(), g.data.as_slice(), "{name}");
        } else {
            assert_eq!(out.get(name).unwrap(), g.data.as_slice(), "{name}");
        }
    }
}

#[test]
fn constant_input_gives_constant_first_layer_statistics() {
    let (cfg, net, mut model) = small_model();
    // a center-tap identity kernel passes channel 0 through unchanged
    let w = model.get_mut(&conv_name(0)).unwrap();
    w.iter_mut().for_each(|v| *v = 0.0);
    let taps = 9;
    for o in 0..cfg.widths[0] {
        w[o * 3 * taps + 4] = 1.0;
    }
    let c = 0.37;
    let x = Tensor4::from_vec([2, 3, 8, 8], vec![c; 2 * 3 * 64]).unwrap();
    let out = adabn_recalibrate(&net, &model, &[x]).unwrap();
    let stat = out.get(&bn_stat_name(0)).unwrap();
    let ch = cfg.widths[0];
    for o in 0..ch {
        assert!((stat[o] - c).abs() < 1e-12, "mean {} vs {c}", stat[o]);
        assert!(stat[ch + o].abs() < 1e-12, "variance {}", stat[ch + o]);
    }
}

#[test]
fn two_batch_recalibration_averages_single_batch_statistics() {
    let (cfg, net, model) = small_model();
    let (a, _) = random_batch(&cfg, 3, 5);
    let (b, _) = random_batch(&cfg, 3, 6);
    let both = adabn_recalibrate(&net, &model, &[a.clone(), b.clone()]).unwrap();
    let only_a = adabn_recalibrate(&net, &model, &[a.clone()]).unwrap();
    let only_b = adabn_recalibrate(&net, &model, &[b.clone()]).unwrap();
    for l in 0..4 {
        let name = bn_stat_name(l);
        for ((x, y), z) in both.get(&name).unwrap().iter().zip(only_a.get(&name).unwrap()).zip(only_b.get(&name).unwrap()) {
            assert!((x - 0.5 * (y + z)).abs() < 1e-12);
        }
    }
    let again = adabn_recalibrate(&net, &both, &[a, b]).unwrap();
    assert!(again.bit_eq(&both));
}

#[test]
fn private_groups_never_reach_the_server() {
    for strategy in [BnStrategy::FedBn, BnStrategy::SiloBn] {
        let mut cfg = tiny_config(4, 2, 3);
        cfg.federation.strategy = strategy;
        let data = data_for(&cfg);
        let mut seen_kinds = Vec::new();
        let mut observe = |u: Upload<'_>| {
            seen_kinds.extend(u.groups.iter().map(|(_, g)| g.kind));
        };
        let out = run_experiment(&cfg, &data, Hooks { upload: Some(&mut observe), report: None }).unwrap();
        assert!(!seen_kinds.is_empty());
        for k in strategy.private_kinds() {
            assert!(!seen_kinds.contains(k), "{strategy:?} uploaded {k:?}");
            assert!(out.global.names_of_kind(*k).is_empty());
        }
    }
}

#[test]
fn silobn_keeps_statistics_local_and_shares_affine() {
    let mut cfg = tiny_config(3, 3, 2);
    cfg.federation.strategy = BnStrategy::SiloBn;
    let data = data_for(&cfg);
    let out = run_experiment(&cfg, &data, Hooks::default()).unwrap();
    let stats: Vec<&[f64]> = (0..3).map(|k| out.store.get(k).unwrap().get(&bn_stat_name(0)).unwrap()).collect();
    assert_ne!(stats[0], stats[1]);
    assert_ne!(stats[1], stats[2]);
    for k in 0..3 {
        let private = out.store.get(k).unwrap();
        assert!(private.names_of_kind(GroupKind::BnAffine).is_empty());
    }
    // at the start of the next round every client receives the same affine groups
    let (shared, _) = split(BnStrategy::SiloBn, &out.global);
    assert_eq!(shared.names_of_kind(GroupKind::BnAffine).len(), 4);
}
