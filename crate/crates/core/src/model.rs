//! Parameter groups of the segmentation network.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::container::{self, Record};
use crate::error::{Error, Result};
use crate::rng::{keyed, Stream};

/// Role of a parameter group. Decides who trains it and who may see it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GroupKind {
    Weight,
    /// BN scale and shift, stored as gamma followed by beta.
    BnAffine,
    /// BN running statistics, stored as mean followed by variance.
    BnStat,
}

impl GroupKind {
    pub fn code(self) -> u8 {
        match self {
            GroupKind::Weight => 0,
            GroupKind::BnAffine => 1,
            GroupKind::BnStat => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(GroupKind::Weight),
            1 => Some(GroupKind::BnAffine),
            2 => Some(GroupKind::BnStat),
            _ => None,
        }
    }

    pub fn is_trainable(self) -> bool {
        !matches!(self, GroupKind::BnStat)
    }
}

/// Shape hyperparameters of the micro segmentation net.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub num_classes: usize,
    pub widths: [usize; 4],
    pub height: usize,
    pub width: usize,
    pub bn_momentum: f64,
    pub bn_eps: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            num_classes: 6,
            widths: [8, 16, 32, 32],
            height: 64,
            width: 64,
            bn_momentum: 0.1,
            bn_eps: 1e-5,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config("model.num_classes must be at least 2".into()));
        }
        if self.height == 0 || self.width == 0 || self.height % 4 != 0 || self.width % 4 != 0 {
            return Err(Error::Config(format!(
                "input size {}x{} must be positive and divisible by 4",
                self.height, self.width
            )));
        }
        if self.widths.iter().any(|&w| w == 0) {
            return Err(Error::Config("model.widths must be positive".into()));
        }
        if !(self.bn_momentum > 0.0 && self.bn_momentum <= 1.0) {
            return Err(Error::Config("model.bn_momentum must lie in (0, 1]".into()));
        }
        if !(self.bn_eps > 0.0) {
            return Err(Error::Config("model.bn_eps must be positive".into()));
        }
        Ok(())
    }

    /// (name, input channels, output channels, kernel, stride) of each conv+BN stage.
    pub fn conv_stages(&self) -> [(usize, usize, usize, usize); 4] {
        let [a, b, c, d] = self.widths;
        [(3, a, 3, 1), (a, b, 3, 2), (b, c, 3, 2), (c, d, 3, 1)]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub kind: GroupKind,
    pub data: Vec<f64>,
}

/// Named parameter groups, iterated in lexicographic order of their names.
///
/// Every mutable borrow bumps `version`, which lets the backward pass detect
/// a cache that was produced before the parameters changed.
#[derive(Debug, Clone)]
pub struct ModelState {
    groups: BTreeMap<String, Group>,
    version: u64,
}

impl PartialEq for ModelState {
    fn eq(&self, other: &Self) -> bool {
        self.groups == other.groups
    }
}

pub fn conv_name(i: usize) -> String {
    format!("conv{}.weight", i + 1)
}

pub fn bn_affine_name(i: usize) -> String {
    format!("bn{}.affine", i + 1)
}

pub fn bn_stat_name(i: usize) -> String {
    format!("bn{}.stat", i + 1)
}

pub const HEAD_WEIGHT: &str = "head.weight";
pub const HEAD_BIAS: &str = "head.bias";

impl ModelState {
    pub fn new() -> Self {
        Self {
            groups: BTreeMap::new(),
            version: 0,
        }
    }

    /// Kaiming-uniform (fan-in) convolutions, unit gamma, zero beta, zero mean and unit variance.
    pub fn init(config: &ModelConfig, seed: u64) -> Self {
        let mut rng = keyed(Stream::Init, &[seed]);
        let mut m = Self::new();
        let mut kaiming = |fan_in: usize, n: usize| -> Vec<f64> {
            let bound = (6.0 / fan_in as f64).sqrt();
            (0..n).map(|_| rng.random_range(-bound..bound)).collect()
        };
        for (i, (cin, cout, k, _)) in config.conv_stages().into_iter().enumerate() {
            m.insert(conv_name(i), GroupKind::Weight, kaiming(cin * k * k, cout * cin * k * k));
            let mut affine = vec![1.0; cout];
            affine.extend(std::iter::repeat_n(0.0, cout));
            m.insert(bn_affine_name(i), GroupKind::BnAffine, affine);
            let mut stat = vec![0.0; cout];
            stat.extend(std::iter::repeat_n(1.0, cout));
            m.insert(bn_stat_name(i), GroupKind::BnStat, stat);
        }
        let feat = config.widths[3];
        m.insert(
            HEAD_WEIGHT.into(),
            GroupKind::Weight,
            kaiming(feat, config.num_classes * feat),
        );
        m.insert(HEAD_BIAS.into(), GroupKind::Weight, vec![0.0; config.num_classes]);
        m
    }

    pub fn insert(&mut self, name: String, kind: GroupKind, data: Vec<f64>) {
        self.version += 1;
        self.groups.insert(name, Group { kind, data });
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.groups.get(name).map(|g| g.data.as_slice())
    }

    pub fn kind(&self, name: &str) -> Option<GroupKind> {
        self.groups.get(name).map(|g| g.kind)
    }

    pub fn group(&self, name: &str) -> Result<&[f64]> {
        self.get(name)
            .ok_or_else(|| Error::Consistency(format!("model has no group {name:?}")))
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Vec<f64>> {
        self.version += 1;
        self.groups.get_mut(name).map(|g| &mut g.data)
    }

    /// Replaces a group's values, keeping its kind. Lengths must agree.
    pub fn set(&mut self, name: &str, data: &[f64]) -> Result<()> {
        let slot = self
            .get_mut(name)
            .ok_or_else(|| Error::Consistency(format!("model has no group {name:?}")))?;
        if slot.len() != data.len() {
            return Err(Error::Consistency(format!(
                "group {name:?} holds {} values, got {}",
                slot.len(),
                data.len()
            )));
        }
        slot.copy_from_slice(data);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Group)> {
        self.groups.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn names_of_kind(&self, kind: GroupKind) -> Vec<String> {
        self.groups
            .iter()
            .filter(|(_, g)| g.kind == kind)
            .map(|(k, _)| k.clone())
            .collect()
    }

    pub fn num_values(&self) -> usize {
        self.groups.values().map(|g| g.data.len()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.groups.values().all(|g| g.data.iter().all(|v| v.is_finite()))
    }

    /// True when every group holds bit-identical values.
    pub fn bit_eq(&self, other: &Self) -> bool {
        self.groups.len() == other.groups.len()
            && self.groups.iter().all(|(k, g)| {
                other.groups.get(k).is_some_and(|o| {
                    o.kind == g.kind
                        && o.data.len() == g.data.len()
                        && o.data.iter().zip(&g.data).all(|(a, b)| a.to_bits() == b.to_bits())
                })
            })
    }

    pub fn to_records(&self) -> Vec<Record> {
        self.groups
            .iter()
            .map(|(name, g)| Record {
                name: name.clone(),
                kind: g.kind.code(),
                data: g.data.clone(),
            })
            .collect()
    }

    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let mut m = Self::new();
        for r in records {
            let kind = GroupKind::from_code(r.kind).ok_or_else(|| {
                Error::Consistency(format!("group {:?} has unknown kind byte {}", r.name, r.kind))
            })?;
            if m.get(&r.name).is_some() {
                return Err(Error::Consistency(format!("duplicate group {:?}", r.name)));
            }
            m.insert(r.name, kind, r.data);
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_file(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(container::read_file(path)?)
    }
}

impl Default for ModelState {
    fn default() -> Self {
        Self::new()
    }
}
