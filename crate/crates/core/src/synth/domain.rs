//! Domain descriptions: a scene layout plus an appearance (weather) style.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const NUM_CLASSES: usize = 6;
pub const ROAD: u8 = 0;
pub const SIDEWALK: u8 = 1;
pub const BUILDING: u8 = 2;
pub const VEGETATION: u8 = 3;
pub const SKY: u8 = 4;
pub const VEHICLE: u8 = 5;

pub const CLASS_NAMES: [&str; NUM_CLASSES] = ["road", "sidewalk", "building", "vegetation", "sky", "vehicle"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Layout {
    Urban,
    Country,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weather {
    Noon,
    Sunset,
    Rainy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainSpec {
    pub layout: Layout,
    pub weather: Weather,
    pub variant: usize,
    pub tint: [f64; 3],
    pub brightness: f64,
    pub contrast: f64,
    pub noise_sigma: f64,
    /// Mix toward per-pixel gray, 0 keeps colors.
    pub desaturation: f64,
    /// Per-image lighting spread: log-brightness std and extra desaturation range.
    pub lighting_jitter: f64,
    pub sidewalk_prob: f64,
    pub building_density: f64,
    pub vehicles: (usize, usize),
}

impl DomainSpec {
    pub fn preset(layout: Layout, weather: Weather, variant: usize) -> Self {
        let v = variant as f64;
        let (sidewalk_prob, building_density, vehicles) = match layout {
            Layout::Urban => (0.9 - 0.1 * v, 0.85 - 0.1 * v, (1, 3)),
            Layout::Country => (0.0, 0.1 + 0.05 * v, (0, 1)),
        };
        let (tint, brightness, contrast, noise_sigma, desaturation) = match weather {
            Weather::Noon => ([1.0, 1.0 - 0.03 * v, 1.0 - 0.06 * v], 1.05, 1.0, 0.02, 0.0),
            Weather::Sunset => ([1.15, 0.85 - 0.03 * v, 0.6 + 0.05 * v], 0.8, 0.9, 0.02, 0.0),
            Weather::Rainy => ([0.85, 0.9, 1.0], 0.65, 0.7, 0.03, 0.3),
        };
        let lighting_jitter = if weather == Weather::Rainy { 0.6 } else { 0.15 };
        Self {
            layout,
            weather,
            variant,
            tint,
            brightness,
            contrast,
            noise_sigma,
            desaturation,
            lighting_jitter,
            sidewalk_prob: sidewalk_prob.clamp(0.0, 1.0),
            building_density: building_density.clamp(0.0, 1.0),
            vehicles,
        }
    }

    pub fn name(&self) -> String {
        let layout = match self.layout {
            Layout::Urban => "urban",
            Layout::Country => "country",
        };
        let weather = match self.weather {
            Weather::Noon => "noon",
            Weather::Sunset => "sunset",
            Weather::Rainy => "rainy",
        };
        format!("{layout}-{weather}-v{}", self.variant)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = [self.sidewalk_prob, self.building_density, self.desaturation, self.lighting_jitter];
        if unit.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Config(format!("domain {}: probability outside [0, 1]", self.name())));
        }
        if !(self.brightness > 0.0 && self.contrast > 0.0 && self.tint.iter().all(|&t| t > 0.0)) {
            return Err(Error::Config(format!("domain {}: gains must be positive", self.name())));
        }
        if !(self.noise_sigma >= 0.0) || self.vehicles.0 > self.vehicles.1 {
            return Err(Error::Config(format!("domain {}: bad noise or vehicle range", self.name())));
        }
        Ok(())
    }
}

/// Named train/unseen domain sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Setting {
    /// Urban and country scenes at noon and sunset; unseen test in rain.
    Rainy,
    /// Urban scenes only; unseen test on country roads in the same weathers.
    Country,
}

impl Setting {
    pub fn train_domains(self) -> Vec<DomainSpec> {
        let mut out = Vec::new();
        match self {
            Setting::Rainy => {
                for layout in [Layout::Urban, Layout::Country] {
                    for variant in 0..2 {
                        for weather in [Weather::Noon, Weather::Sunset] {
                            out.push(DomainSpec::preset(layout, weather, variant));
                        }
                    }
                }
            }
            Setting::Country => {
                for variant in 0..4 {
                    for weather in [Weather::Noon, Weather::Sunset] {
                        out.push(DomainSpec::preset(Layout::Urban, weather, variant));
                    }
                }
            }
        }
        out
    }

    pub fn unseen_domain(self) -> DomainSpec {
        match self {
            Setting::Rainy => DomainSpec::preset(Layout::Urban, Weather::Rainy, 0),
            Setting::Country => DomainSpec::preset(Layout::Country, Weather::Noon, 0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_distinct() {
        for setting in [Setting::Rainy, Setting::Country] {
            let train = setting.train_domains();
            assert_eq!(train.len(), 8);
            let mut names: Vec<String> = train.iter().map(DomainSpec::name).collect();
            names.push(setting.unseen_domain().name());
            for d in train.iter().chain([&setting.unseen_domain()]) {
                d.validate().unwrap();
            }
            let n = names.len();
            names.sort();
            names.dedup();
            assert_eq!(names.len(), n);
        }
        assert_eq!(DomainSpec::preset(Layout::Country, Weather::Noon, 1).sidewalk_prob, 0.0);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut d = DomainSpec::preset(Layout::Urban, Weather::Noon, 0);
        d.sidewalk_prob = 1.5;
        assert!(d.validate().is_err());
        let mut d = DomainSpec::preset(Layout::Urban, Weather::Noon, 0);
        d.brightness = 0.0;
        assert!(d.validate().is_err());
    }
}
