//! Style-augmentation policy: translate a random part of a client's images
//! toward styles sampled from the shared banks.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bank::StyleBanks;
use super::cfsi::cfsi_translate_unclamped;
use super::fft::Fft2;
use super::lab::lab_translate;
use crate::data::ClientDataset;
use crate::error::{Error, Result};
use crate::rng::{keyed, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StyleMethod {
    None,
    Cfsi,
    Lab,
}

impl StyleMethod {
    pub fn label(self) -> &'static str {
        match self {
            StyleMethod::None => "none",
            StyleMethod::Cfsi => "CFSI",
            StyleMethod::Lab => "LAB",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StylePolicy {
    pub method: StyleMethod,
    /// Share of each client's images translated per epoch.
    pub fraction: f64,
    /// Low-frequency window side as a fraction of the shorter image side.
    pub beta_win: f64,
    /// Never sample a style from the client's own images.
    pub exclude_own: bool,
}

impl Default for StylePolicy {
    fn default() -> Self {
        Self {
            method: StyleMethod::None,
            fraction: 0.5,
            beta_win: 0.1,
            exclude_own: true,
        }
    }
}

impl StylePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fraction) {
            return Err(Error::Config(format!("style.fraction {} outside [0, 1]", self.fraction)));
        }
        if !(self.beta_win > 0.0 && self.beta_win <= 0.5) {
            return Err(Error::Config(format!("style.beta_win {} outside (0, 0.5]", self.beta_win)));
        }
        Ok(())
    }
}

/// Translates `floor(fraction * n)` seeded-randomly chosen images; each picks
/// one bank entry uniformly (excluding the client's own entries when so
/// configured) and, for CFSI, a fresh `lambda ~ U[0, 1]`. Masks are never touched.
pub fn apply_style_policy(
    dataset: &ClientDataset,
    banks: &StyleBanks,
    policy: &StylePolicy,
    seed: u64,
) -> Result<ClientDataset> {
    policy.validate()?;
    let n = dataset.len();
    let count = (policy.fraction * n as f64).floor() as usize;
    if policy.method == StyleMethod::None || count == 0 {
        return Ok(dataset.clone());
    }
    let owners: Vec<usize> = match policy.method {
        StyleMethod::Cfsi => banks.amplitude.entries.iter().map(|e| e.owner).collect(),
        StyleMethod::Lab => banks.lab.entries.iter().map(|e| e.owner).collect(),
        StyleMethod::None => unreachable!(),
    };
    let candidates: Vec<usize> = owners
        .iter()
        .enumerate()
        .filter(|(_, &o)| !(policy.exclude_own && o == dataset.client_id))
        .map(|(i, _)| i)
        .collect();
    if candidates.is_empty() {
        return Err(Error::Config(format!(
            "{} bank has no entries usable by client {}",
            policy.method.label(),
            dataset.client_id
        )));
    }
    let mut rng = keyed(Stream::Style, &[seed]);
    let mut chosen = sample(&mut rng, n, count).into_vec();
    chosen.sort_unstable();
    let mut out = dataset.clone();
    let fft = (policy.method == StyleMethod::Cfsi)
        .then(|| Fft2::new(dataset.images[0].height, dataset.images[0].width));
    for i in chosen {
        let entry = candidates[rng.random_range(0..candidates.len())];
        let src = &dataset.images[i];
        out.images[i] = match policy.method {
            StyleMethod::Cfsi => {
                let lambda: f64 = rng.random_range(0.0..=1.0);
                let target = &banks.amplitude.entries[entry];
                if (target.height, target.width) != (src.height, src.width) {
                    return Err(Error::Argument("bank spectrum and image sizes differ".into()));
                }
                let mut img = cfsi_translate_unclamped(
                    fft.as_ref().expect("planned for CFSI"),
                    src,
                    &target.amplitude,
                    lambda,
                    policy.beta_win,
                )?;
                img.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
                img
            }
            StyleMethod::Lab => {
                let target = &banks.lab.entries[entry];
                lab_translate(src, target.mean, target.std)
            }
            StyleMethod::None => unreachable!(),
        };
    }
    Ok(out)
}
