//! Experiment configuration, read from TOML with `[federation]`, `[model]`,
//! `[data]`, `[style]` and `[server_opt]` sections. Every field has a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bn_strategy::BnStrategy;
use crate::error::{Error, Result};
use crate::fed::server_opt::ServerOptConfig;
use crate::model::ModelConfig;
use crate::optim::SgdParams;
use crate::style::StylePolicy;
use crate::synth::{Setting, SplitConfig, SplitMode, NUM_CLASSES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FederationConfig {
    pub clients_per_round: usize,
    pub rounds: usize,
    pub local_epochs: usize,
    pub eval_every: usize,
    pub seed: u64,
    pub strategy: BnStrategy,
    /// Average client deltas with equal weights instead of by sample count.
    pub uniform_delta: bool,
    /// Evaluate FedBN on the unseen client after AdaBN recalibration.
    pub fedbn_unseen_adabn: bool,
    /// Train the sampled clients of a round on the worker pool.
    pub parallel: bool,
}

impl Default for FederationConfig {
    fn default() -> Self {
        Self {
            clients_per_round: 5,
            rounds: 200,
            local_epochs: 2,
            eval_every: 10,
            seed: 0,
            strategy: BnStrategy::ShareAll,
            uniform_delta: false,
            fedbn_unseen_adabn: false,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub num_classes: usize,
    pub widths: [usize; 4],
    pub bn_momentum: f64,
    pub bn_eps: f64,
    pub base_lr: f64,
    pub lr_power: f64,
    pub batch_size: usize,
    pub ohem_fraction: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        let sgd = SgdParams::default();
        Self {
            num_classes: m.num_classes,
            widths: m.widths,
            bn_momentum: m.bn_momentum,
            bn_eps: m.bn_eps,
            base_lr: 0.1,
            lr_power: 0.9,
            batch_size: 16,
            ohem_fraction: 0.25,
            momentum: sgd.momentum,
            weight_decay: sgd.weight_decay,
        }
    }
}

impl ModelSection {
    pub fn sgd(&self) -> SgdParams {
        SgdParams {
            momentum: self.momentum,
            weight_decay: self.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub setting: Setting,
    pub mode: SplitMode,
    pub num_clients: usize,
    pub samples_per_client: usize,
    pub test_samples: usize,
    pub height: usize,
    pub width: usize,
    /// Scene seed; the federation seed when absent.
    pub seed: Option<u64>,
    /// Load a generated dataset from this directory instead of generating inline.
    pub path: Option<PathBuf>,
    pub augment: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        let s = SplitConfig::from_setting(Setting::Rainy, SplitMode::Heterogeneous);
        Self {
            setting: Setting::Rainy,
            mode: SplitMode::Heterogeneous,
            num_clients: s.num_clients,
            samples_per_client: s.samples_per_client,
            test_samples: s.test_samples,
            height: s.height,
            width: s.width,
            seed: None,
            path: None,
            augment: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub federation: FederationConfig,
    pub model: ModelSection,
    pub data: DataConfig,
    pub style: StylePolicy,
    pub server_opt: ServerOptConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            num_classes: self.model.num_classes,
            widths: self.model.widths,
            height: self.data.height,
            width: self.data.width,
            bn_momentum: self.model.bn_momentum,
            bn_eps: self.model.bn_eps,
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            mode: self.data.mode,
            num_clients: self.data.num_clients,
            samples_per_client: self.data.samples_per_client,
            test_samples: self.data.test_samples,
            height: self.data.height,
            width: self.data.width,
            ..SplitConfig::from_setting(self.data.setting, self.data.mode)
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.data.seed.unwrap_or(self.federation.seed)
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.federation;
        if f.rounds == 0 || f.local_epochs == 0 || f.eval_every == 0 {
            return Err(Error::Config(
                "federation.rounds, local_epochs and eval_every must be positive".into(),
            ));
        }
        if f.clients_per_round == 0 || f.clients_per_round > self.data.num_clients {
            return Err(Error::Config(format!(
                "federation.clients_per_round {} must lie in [1, data.num_clients = {}]",
                f.clients_per_round, self.data.num_clients
            )));
        }
        let m = &self.model;
        if m.num_classes != NUM_CLASSES {
            return Err(Error::Config(format!(
                "model.num_classes must be {NUM_CLASSES} for the synthetic scenes"
            )));
        }
        if !(m.base_lr >= 0.0) || !(m.lr_power > 0.0) {
            return Err(Error::Config("model.base_lr must be >= 0 and model.lr_power > 0".into()));
        }
        if m.batch_size < 2 {
            return Err(Error::Config("model.batch_size must be at least 2".into()));
        }
        if !(m.ohem_fraction > 0.0 && m.ohem_fraction <= 1.0) {
            return Err(Error::Config("model.ohem_fraction must lie in (0, 1]".into()));
        }
        if !(m.momentum >= 0.0) || !(m.weight_decay >= 0.0) {
            return Err(Error::Config("model.momentum and model.weight_decay must be >= 0".into()));
        }
        self.model_config().validate()?;
        self.split_config().validate()?;
        self.style.validate()?;
        self.server_opt.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fed::server_opt::ServerOptKind;

    #[test]
    fn empty_file_gives_defaults() {
        let cfg = ExperimentConfig::from_toml("").unwrap();
        assert_eq!(cfg, ExperimentConfig::default());
        assert_eq!(cfg.federation.clients_per_round, 5);
        assert_eq!(cfg.data.num_clients, 24);
        assert_eq!(cfg.server_opt.effective_lr(), 1.0);
    }

    #[test]
    fn sections_override_defaults_and_roundtrip() {
        let cfg = ExperimentConfig::from_toml(
            "[federation]\nrounds = 7\nstrategy = \"silo_bn\"\n[server_opt]\nkind = \"adam\"\n[style]\nmethod = \"lab\"\n",
        )
        .unwrap();
        assert_eq!(cfg.federation.rounds, 7);
        assert_eq!(cfg.federation.strategy, BnStrategy::SiloBn);
        assert_eq!(cfg.server_opt.kind, ServerOptKind::Adam);
        assert_eq!(cfg.server_opt.effective_lr(), 0.1);
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_named() {
        let err = ExperimentConfig::from_toml("[federation]\nroundz = 3\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("roundz")), "{err}");
        let err = ExperimentConfig::from_toml("[server_opt]\nkind = \"rmsprop\"\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("rmsprop")), "{err}");
        let err = ExperimentConfig::from_toml("[federation]\nclients_per_round = 99\n").unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("clients_per_round")), "{err}");
        assert!(ExperimentConfig::from_toml("[data]\nheight = 30\n").is_err());
    }
}
