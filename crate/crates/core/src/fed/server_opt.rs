//! Server optimizers applied to the negated pseudo-gradient `g = -delta`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::aggregate::PseudoGradient;
use crate::error::{Error, Result};
use crate::model::{GroupKind, ModelState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ServerOptKind {
    Sgd,
    #[serde(rename = "fedavgm")]
    FedAvgM,
    Adam,
    #[serde(rename = "adagrad")]
    AdaGrad,
}

impl ServerOptKind {
    pub const ALL: [ServerOptKind; 4] = [Self::Sgd, Self::FedAvgM, Self::Adam, Self::AdaGrad];

    pub fn default_lr(self) -> f64 {
        match self {
            Self::Sgd | Self::FedAvgM => 1.0,
            Self::Adam | Self::AdaGrad => 0.1,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Self::Sgd => "SGD",
            Self::FedAvgM => "FedAvgM",
            Self::Adam => "Adam",
            Self::AdaGrad => "AdaGrad",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ServerOptConfig {
    pub kind: ServerOptKind,
    /// Server learning rate; per-kind default when absent.
    pub lr: Option<f64>,
    pub momentum: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for ServerOptConfig {
    fn default() -> Self {
        Self {
            kind: ServerOptKind::Sgd,
            lr: None,
            momentum: 0.9,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl ServerOptConfig {
    pub fn effective_lr(&self) -> f64 {
        self.lr.unwrap_or(self.kind.default_lr())
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.effective_lr() > 0.0) {
            return Err(Error::Config("server_opt.lr must be positive".into()));
        }
        let unit = |v: f64| (0.0..1.0).contains(&v);
        if !unit(self.momentum) || !unit(self.beta1) || !unit(self.beta2) {
            return Err(Error::Config("server_opt momentum and betas must lie in [0, 1)".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config("server_opt.eps must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerOptState {
    pub config: ServerOptConfig,
    /// Momentum or Adam first moment.
    pub first: BTreeMap<String, Vec<f64>>,
    /// Adam second moment or AdaGrad accumulator.
    pub second: BTreeMap<String, Vec<f64>>,
    pub step: u64,
}

impl ServerOptState {
    pub fn new(config: ServerOptConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            first: BTreeMap::new(),
            second: BTreeMap::new(),
            step: 0,
        })
    }

    /// Updates `global` in place. Running statistics are not gradients: when
    /// shared they are replaced by the client average, bypassing the
    /// optimizer. With SGD the update is written `(1 - lr) w + lr * avg`,
    /// which equals `w + lr * delta` and is exact averaging at `lr = 1`.
    pub fn step(&mut self, global: &mut ModelState, pg: &PseudoGradient) -> Result<()> {
        let names: Vec<String> = global.names().map(str::to_string).collect();
        if names.len() != pg.delta.len() || names.iter().any(|n| !pg.delta.contains_key(n)) {
            return Err(Error::Consistency("pseudo-gradient and server model cover different groups".into()));
        }
        self.step += 1;
        let c = self.config.clone();
        let lr = c.effective_lr();
        let t = self.step as i32;
        for name in names {
            let kind = global.kind(&name).expect("listed above");
            let delta = &pg.delta[&name];
            let avg = &pg.average[&name];
            let w = global.get_mut(&name).expect("listed above");
            if w.len() != delta.len() {
                return Err(Error::Consistency(format!("group {name:?} changed shape")));
            }
            if kind == GroupKind::BnStat {
                w.copy_from_slice(avg);
                continue;
            }
            let zeros = || vec![0.0; delta.len()];
            match c.kind {
                ServerOptKind::Sgd => {
                    for i in 0..w.len() {
                        w[i] = (1.0 - lr) * w[i] + lr * avg[i];
                    }
                }
                ServerOptKind::FedAvgM => {
                    let v = self.first.entry(name.clone()).or_insert_with(zeros);
                    for i in 0..w.len() {
                        v[i] = c.momentum * v[i] - delta[i];
                        w[i] -= lr * v[i];
                    }
                }
                ServerOptKind::Adam => {
                    let m = self.first.entry(name.clone()).or_insert_with(zeros);
                    let v = self.second.entry(name.clone()).or_insert_with(zeros);
                    let bc1 = 1.0 - c.beta1.powi(t);
                    let bc2 = 1.0 - c.beta2.powi(t);
                    for i in 0..w.len() {
                        let g = -delta[i];
                        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
                        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
                        w[i] -= lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + c.eps);
                    }
                }
                ServerOptKind::AdaGrad => {
                    let acc = self.second.entry(name.clone()).or_insert_with(zeros);
                    for i in 0..w.len() {
                        let g = -delta[i];
                        acc[i] += g * g;
                        w[i] -= lr * g / (acc[i].sqrt() + c.eps);
                    }
                }
            }
        }
        if !global.all_finite() {
            return Err(Error::Numeric(format!("server model non-finite after step {}", self.step)));
        }
        Ok(())
    }
}
