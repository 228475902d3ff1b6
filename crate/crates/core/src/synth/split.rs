//! Partitioning generated scenes into federated clients and test clients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::domain::{DomainSpec, Setting};
use super::scene::generate_scene;
use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::rng::{keyed, mix, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Every image's domain drawn i.i.d. over the train domains.
    Uniform,
    /// Each client holds images of a single domain.
    Heterogeneous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitConfig {
    pub mode: SplitMode,
    pub num_clients: usize,
    pub samples_per_client: usize,
    pub train_domains: Vec<DomainSpec>,
    pub unseen_domain: DomainSpec,
    pub test_samples: usize,
    pub height: usize,
    pub width: usize,
}

impl SplitConfig {
    pub fn from_setting(setting: Setting, mode: SplitMode) -> Self {
        Self {
            mode,
            num_clients: 24,
            samples_per_client: 20,
            train_domains: setting.train_domains(),
            unseen_domain: setting.unseen_domain(),
            test_samples: 48,
            height: 64,
            width: 64,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 || self.samples_per_client == 0 || self.test_samples == 0 {
            return Err(Error::Config("client count and sample counts must be positive".into()));
        }
        if self.train_domains.is_empty() {
            return Err(Error::Config("no train domains".into()));
        }
        if self.train_domains.contains(&self.unseen_domain) {
            return Err(Error::Config(format!(
                "unseen domain {} is also a train domain",
                self.unseen_domain.name()
            )));
        }
        for d in self.train_domains.iter().chain([&self.unseen_domain]) {
            d.validate()?;
        }
        Ok(())
    }

    /// Train domains in index order, then the unseen domain.
    pub fn domain_names(&self) -> Vec<String> {
        self.train_domains
            .iter()
            .chain([&self.unseen_domain])
            .map(DomainSpec::name)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederatedData {
    pub train: Vec<ClientDataset>,
    pub seen_test: ClientDataset,
    pub unseen_test: ClientDataset,
    /// Index `i` names domain id `i` used in `ClientDataset::domains`.
    pub domain_names: Vec<String>,
}

impl FederatedData {
    pub fn num_samples(&self) -> usize {
        self.train.iter().map(ClientDataset::len).sum::<usize>() + self.seen_test.len() + self.unseen_test.len()
    }
}

const ROLE_TRAIN: u64 = 0;
const ROLE_SEEN: u64 = 1;
const ROLE_UNSEEN: u64 = 2;

fn build_client(
    split: &SplitConfig,
    client_id: usize,
    domains: Vec<usize>,
    seed: u64,
    role: u64,
) -> Result<ClientDataset> {
    let all: Vec<&DomainSpec> = split.train_domains.iter().chain([&split.unseen_domain]).collect();
    let mut images = Vec::with_capacity(domains.len());
    let mut masks = Vec::with_capacity(domains.len());
    for (i, &d) in domains.iter().enumerate() {
        let scene_seed = mix(Stream::Split, &[seed, role, client_id as u64, i as u64]);
        let (img, mask) = generate_scene(all[d], scene_seed, split.height, split.width)?;
        images.push(img);
        masks.push(mask);
    }
    Ok(ClientDataset {
        client_id,
        images,
        masks,
        domains,
    })
}

/// Train clients get ids `0..num_clients`; the seen test client is
/// `num_clients` and the unseen one `num_clients + 1`. Every image comes from
/// its own scene seed, so clients never share images.
pub fn make_split(split: &SplitConfig, seed: u64) -> Result<FederatedData> {
    split.validate()?;
    let nd = split.train_domains.len();
    let mut rng = keyed(Stream::Split, &[seed, u64::MAX]);
    let mut train = Vec::with_capacity(split.num_clients);
    for k in 0..split.num_clients {
        let domains = match split.mode {
            SplitMode::Uniform => (0..split.samples_per_client).map(|_| rng.random_range(0..nd)).collect(),
            SplitMode::Heterogeneous => vec![k % nd; split.samples_per_client],
        };
        train.push(build_client(split, k, domains, seed, ROLE_TRAIN)?);
    }
    let seen = (0..split.test_samples).map(|i| i % nd).collect();
    let unseen = vec![nd; split.test_samples];
    Ok(FederatedData {
        train,
        seen_test: build_client(split, split.num_clients, seen, seed, ROLE_SEEN)?,
        unseen_test: build_client(split, split.num_clients + 1, unseen, seed, ROLE_UNSEEN)?,
        domain_names: split.domain_names(),
    })
}
