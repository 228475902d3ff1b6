//! The round loop: sample, train locally, aggregate, step the server model,
//! evaluate.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::aggregate::{aggregate, ClientUpdate};
use super::eval::EvalContext;
use super::local::{local_train, LocalTrainConfig, StyleContext};
use super::sampling::sample_clients;
use super::server_opt::ServerOptState;
use crate::bn_strategy::{materialize_client_model, split, PrivateStore};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::metrics::{final_score, ConfusionMatrix, EvalRecord};
use crate::model::ModelState;
use crate::nn::SegNet;
use crate::style::{build_banks, StyleBanks, StyleMethod};
use crate::synth::FederatedData;

pub const CSV_HEADER: &str = "round,seen_miou,unseen_miou,mean_loss";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    /// 1-based round index.
    pub round: usize,
    pub sampled: Vec<usize>,
    pub mean_loss: f64,
    pub seen_miou: Option<f64>,
    pub unseen_miou: Option<f64>,
}

impl RoundReport {
    pub fn csv_row(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{}",
            self.round,
            opt(self.seen_miou),
            opt(self.unseen_miou),
            self.mean_loss
        )
    }
}

/// One client's shared groups as they cross to the server.
#[derive(Debug, Clone, Copy)]
pub struct Upload<'a> {
    pub round: usize,
    pub client_id: usize,
    pub groups: &'a ModelState,
}

/// Optional observers of a run.
#[derive(Default)]
pub struct Hooks<'a> {
    pub upload: Option<&'a mut dyn FnMut(Upload<'_>)>,
    pub report: Option<&'a mut dyn FnMut(&RoundReport, &[EvalRecord]) -> Result<()>>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub reports: Vec<RoundReport>,
    pub evals: Vec<EvalRecord>,
    /// Server-held groups after the last round.
    pub global: ModelState,
    pub store: PrivateStore,
    pub seen_final: Option<f64>,
    pub unseen_final: Option<f64>,
    pub wall_seconds: f64,
}

impl ExperimentOutcome {
    pub fn csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.reports {
            out.push_str(&r.csv_row());
            out.push('\n');
        }
        out
    }
}

fn eval_record(round: usize, split: &str, cm: &ConfusionMatrix) -> EvalRecord {
    let (per_class_iou, miou) = cm.miou();
    EvalRecord {
        round,
        split: split.to_string(),
        per_class_iou,
        miou,
    }
}

pub fn local_config(cfg: &ExperimentConfig) -> LocalTrainConfig {
    LocalTrainConfig {
        epochs: cfg.federation.local_epochs,
        total_rounds: cfg.federation.rounds,
        base_lr: cfg.model.base_lr,
        lr_power: cfg.model.lr_power,
        batch_size: cfg.model.batch_size,
        ohem_fraction: cfg.model.ohem_fraction,
        sgd: cfg.model.sgd(),
        augment: cfg.data.augment,
        seed: cfg.federation.seed,
    }
}

/// Runs `cfg.federation.rounds` rounds on `data`. Evaluation happens every
/// `eval_every` rounds and after the last one.
pub fn run_experiment(cfg: &ExperimentConfig, data: &FederatedData, mut hooks: Hooks<'_>) -> Result<ExperimentOutcome> {
    let start = Instant::now();
    cfg.validate()?;
    let fed = &cfg.federation;
    if data.train.len() < fed.clients_per_round {
        return Err(Error::Config(format!(
            "{} clients cannot fill rounds of {}",
            data.train.len(),
            fed.clients_per_round
        )));
    }
    for c in data.train.iter().chain([&data.seen_test, &data.unseen_test]) {
        c.validate(cfg.model.num_classes)?;
    }
    let net = SegNet::new(&cfg.model_config())?;
    let init = ModelState::init(&cfg.model_config(), fed.seed);
    let (mut global, _) = split(fed.strategy, &init);
    let mut store = PrivateStore::new();
    let mut server = ServerOptState::new(cfg.server_opt.clone())?;
    let banks: Option<StyleBanks> = match cfg.style.method {
        StyleMethod::None => None,
        _ => Some(build_banks(&data.train)?),
    };
    let style = banks.as_ref().map(|b| StyleContext {
        banks: b,
        policy: &cfg.style,
    });
    let local = local_config(cfg);
    let mut reports = Vec::with_capacity(fed.rounds);
    let mut evals = Vec::new();
    let mut seen_hist = Vec::new();
    let mut unseen_hist = Vec::new();

    for t in 0..fed.rounds {
        let sampled = sample_clients(t, data.train.len(), fed.clients_per_round, fed.seed)?;
        let train_one = |&k: &usize| -> Result<(ModelState, f64)> {
            let client = &data.train[k];
            let start = materialize_client_model(fed.strategy, &global, &store, client.client_id, &init)?;
            local_train(&net, client, &start, &local, t, style)
        };
        let results: Vec<Result<(ModelState, f64)>> = if fed.parallel {
            sampled.par_iter().map(train_one).collect()
        } else {
            sampled.iter().map(train_one).collect()
        };
        let mut updates = Vec::with_capacity(sampled.len());
        let mut loss_sum = 0.0;
        for (&k, res) in sampled.iter().zip(results) {
            let (model, loss) = res?;
            let (shared, private) = split(fed.strategy, &model);
            let client = &data.train[k];
            if let Some(cb) = hooks.upload.as_mut() {
                cb(Upload {
                    round: t + 1,
                    client_id: client.client_id,
                    groups: &shared,
                });
            }
            store.put(client.client_id, private);
            loss_sum += loss;
            updates.push(ClientUpdate {
                client_id: client.client_id,
                shared,
                num_samples: client.len(),
            });
        }
        let pg = aggregate(&updates, &global, fed.strategy, fed.uniform_delta)?;
        server.step(&mut global, &pg)?;

        let round = t + 1;
        let mut report = RoundReport {
            round,
            sampled,
            mean_loss: loss_sum / updates.len() as f64,
            seen_miou: None,
            unseen_miou: None,
        };
        let mut new_evals = Vec::new();
        if round % fed.eval_every == 0 || round == fed.rounds {
            let ctx = EvalContext {
                net: &net,
                strategy: fed.strategy,
                global: &global,
                store: &store,
                init: &init,
                train: &data.train,
                batch_size: cfg.model.batch_size,
            };
            let seen = eval_record(round, "seen", &ctx.seen(&data.seen_test)?);
            report.seen_miou = Some(seen.miou);
            seen_hist.push((round, seen.miou));
            new_evals.push(seen);
            if let Some(cm) = ctx.unseen(&data.unseen_test, fed.fedbn_unseen_adabn)? {
                let unseen = eval_record(round, "unseen", &cm);
                report.unseen_miou = Some(unseen.miou);
                unseen_hist.push((round, unseen.miou));
                new_evals.push(unseen);
            }
        }
        if let Some(cb) = hooks.report.as_mut() {
            cb(&report, &new_evals)?;
        }
        reports.push(report);
        evals.extend(new_evals);
    }
    Ok(ExperimentOutcome {
        reports,
        evals,
        global,
        store,
        seen_final: final_score(&seen_hist).ok(),
        unseen_final: final_score(&unseen_hist).ok(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}
