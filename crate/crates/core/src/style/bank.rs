//! Shared distribution banks built once from every training client.

use std::path::Path;

use super::cfsi::amplitude_spectrum;
use super::fft::Fft2;
use super::lab::{lab_stats, MIN_STD};
use crate::container::{self, Record};
use crate::data::ClientDataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AmplitudeEntry {
    pub owner: usize,
    pub height: usize,
    pub width: usize,
    /// Three concatenated (height, width) amplitude planes.
    pub amplitude: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AmplitudeBank {
    pub entries: Vec<AmplitudeEntry>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabEntry {
    pub owner: usize,
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabStatsBank {
    pub entries: Vec<LabEntry>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StyleBanks {
    pub amplitude: AmplitudeBank,
    pub lab: LabStatsBank,
}

const AMPLITUDE_KIND: u8 = 3;
const LAB_KIND: u8 = 4;

/// One amplitude spectrum and one LAB (mean, std) pair per training image, in
/// (client, image) order. Images with a constant LAB channel only enter the
/// amplitude bank.
pub fn build_banks(clients: &[ClientDataset]) -> Result<StyleBanks> {
    let mut banks = StyleBanks::default();
    let mut fft: Option<Fft2> = None;
    for client in clients {
        if client.is_empty() {
            return Err(Error::Argument(format!("client {} has no images", client.client_id)));
        }
        for img in &client.images {
            let plan = match &fft {
                Some(f) if f.dims() == (img.height, img.width) => f,
                _ => fft.insert(Fft2::new(img.height, img.width)),
            };
            banks.amplitude.entries.push(AmplitudeEntry {
                owner: client.client_id,
                height: img.height,
                width: img.width,
                amplitude: amplitude_spectrum(plan, img)?,
            });
            let (mean, std) = lab_stats(img);
            if std.iter().all(|&s| s > MIN_STD) {
                banks.lab.entries.push(LabEntry {
                    owner: client.client_id,
                    mean,
                    std,
                });
            }
        }
    }
    Ok(banks)
}

impl StyleBanks {
    /// Amplitude records are named `"amp/{owner}/3x{h}x{w}"`, LAB records
    /// `"lab/{owner}"` holding mean‖std.
    pub fn to_records(&self) -> Vec<Record> {
        let amp = self.amplitude.entries.iter().map(|e| Record {
            name: format!("amp/{}/3x{}x{}", e.owner, e.height, e.width),
            kind: AMPLITUDE_KIND,
            data: e.amplitude.clone(),
        });
        let lab = self.lab.entries.iter().map(|e| Record {
            name: format!("lab/{}", e.owner),
            kind: LAB_KIND,
            data: e.mean.iter().chain(&e.std).copied().collect(),
        });
        amp.chain(lab).collect()
    }

    pub fn from_records(records: Vec<Record>) -> Result<Self> {
        let bad = |r: &Record| Error::Consistency(format!("bad bank record {:?}", r.name));
        let mut banks = StyleBanks::default();
        for r in records {
            let parts: Vec<&str> = r.name.split('/').collect();
            match (r.kind, parts.as_slice()) {
                (AMPLITUDE_KIND, ["amp", owner, shape]) => {
                    let owner = owner.parse().map_err(|_| bad(&r))?;
                    let dims: Vec<usize> = shape
                        .split('x')
                        .map(str::parse)
                        .collect::<std::result::Result<_, _>>()
                        .map_err(|_| bad(&r))?;
                    let [3, height, width] = dims[..] else { return Err(bad(&r)) };
                    if r.data.len() != 3 * height * width {
                        return Err(bad(&r));
                    }
                    banks.amplitude.entries.push(AmplitudeEntry {
                        owner,
                        height,
                        width,
                        amplitude: r.data,
                    });
                }
                (LAB_KIND, ["lab", owner]) if r.data.len() == 6 => {
                    banks.lab.entries.push(LabEntry {
                        owner: owner.parse().map_err(|_| bad(&r))?,
                        mean: [r.data[0], r.data[1], r.data[2]],
                        std: [r.data[3], r.data[4], r.data[5]],
                    });
                }
                _ => return Err(bad(&r)),
            }
        }
        Ok(banks)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        container::write_file(path, &self.to_records())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_records(container::read_file(path)?)
    }
}
