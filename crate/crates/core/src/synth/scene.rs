//! Procedural road scenes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::domain::{DomainSpec, Weather, BUILDING, NUM_CLASSES, ROAD, SIDEWALK, SKY, VEGETATION, VEHICLE};
use crate::data::{Image, Mask};
use crate::error::{Error, Result};
use crate::rng::{keyed, Stream};

const RAIN_SKY: [f64; 3] = [0.62, 0.63, 0.66];

struct Block {
    x0: usize,
    x1: usize,
    class: u8,
    top: usize,
    color: [f64; 3],
}

fn jitter(rng: &mut ChaCha8Rng, base: [f64; 3], amount: f64) -> [f64; 3] {
    base.map(|v| (v + rng.random_range(-amount..=amount)).clamp(0.0, 1.0))
}

fn side_blocks(rng: &mut ChaCha8Rng, domain: &DomainSpec, height: usize, width: usize, horizon: usize) -> Vec<Block> {
    let mut blocks = Vec::new();
    let mut x = 0;
    while x < width {
        let w = rng.random_range(width / 8..=width / 4).max(1);
        let x1 = (x + w).min(width);
        let building = rng.random::<f64>() < domain.building_density;
        let (class, rise, color) = if building {
            let rise = rng.random_range(0.12..0.35);
            (BUILDING, rise, jitter(rng, [0.58, 0.38, 0.32], 0.1))
        } else {
            let rise = rng.random_range(0.0..0.12);
            (VEGETATION, rise, jitter(rng, [0.22, 0.5, 0.16], 0.06))
        };
        let top = horizon.saturating_sub((rise * height as f64) as usize);
        blocks.push(Block { x0: x, x1, class, top, color });
        x = x1;
    }
    blocks
}

/// Draws one (image, mask) pair. Geometry depends only on the semantic
/// parameters and `seed`, so domains that differ in style alone share masks.
pub fn generate_scene(domain: &DomainSpec, seed: u64, height: usize, width: usize) -> Result<(Image, Mask)> {
    if height == 0 || width == 0 || height % 4 != 0 || width % 4 != 0 {
        return Err(Error::Argument(format!(
            "scene size {height}x{width} must be positive and divisible by 4"
        )));
    }
    domain.validate()?;
    let mut geo = keyed(Stream::Scene, &[seed, 0]);
    let (h, w) = (height as f64, width as f64);

    let horizon = (h * geo.random_range(0.35..0.5)) as usize;
    let vanish = w * geo.random_range(0.4..0.6);
    let bottom_center = w * geo.random_range(0.4..0.6);
    let bottom_half = w * geo.random_range(0.3..0.45);
    let top_half = w * 0.03;
    let sidewalk = geo.random::<f64>() < domain.sidewalk_prob;
    let blocks = side_blocks(&mut geo, domain, height, width, horizon);

    let road_at = |y: usize| -> Option<(f64, f64)> {
        if y < horizon {
            return None;
        }
        let t = (y - horizon) as f64 / (h - horizon as f64).max(1.0);
        Some((vanish + (bottom_center - vanish) * t, top_half + (bottom_half - top_half) * t))
    };

    let mut mask = vec![SKY; height * width];
    for y in 0..height {
        let road = road_at(y);
        for b in &blocks {
            for x in b.x0..b.x1 {
                let i = y * width + x;
                if y >= b.top {
                    mask[i] = b.class;
                }
                if let Some((c, half)) = road {
                    let d = (x as f64 + 0.5 - c).abs();
                    if d <= half {
                        mask[i] = ROAD;
                    } else if sidewalk && d <= half * 1.35 + 1.0 {
                        mask[i] = SIDEWALK;
                    }
                }
            }
        }
    }

    let (lo, hi) = domain.vehicles;
    let count = geo.random_range(lo..=hi);
    let mut vehicles = Vec::new();
    for _ in 0..count {
        let t: f64 = geo.random_range(0.3..0.95);
        let y1 = horizon + (t * (h - horizon as f64)) as usize;
        let Some((c, half)) = road_at(y1.min(height - 1)) else { continue };
        let vw = (half * geo.random_range(0.45..0.7)).max(2.0);
        let vh = (vw * geo.random_range(0.55..0.8)).max(2.0);
        let cx = c + geo.random_range(-0.5..0.5) * (half - vw / 2.0).max(0.0);
        let color = jitter(&mut geo, [0.5, 0.5, 0.5], 0.45);
        let x0 = (cx - vw / 2.0).max(0.0) as usize;
        let x1 = ((cx + vw / 2.0) as usize).min(width);
        let y0 = (y1 as f64 - vh).max(0.0) as usize;
        vehicles.push((x0, x1, y0, y1.min(height), color));
    }
    for &(x0, x1, y0, y1, _) in &vehicles {
        for y in y0..y1 {
            mask[y * width + x0..y * width + x1].fill(VEHICLE);
        }
    }

    // base colors with class textures
    let road_color = jitter(&mut geo, [0.36, 0.36, 0.38], 0.04);
    let walk_color = jitter(&mut geo, [0.62, 0.57, 0.52], 0.05);
    let sky_top = jitter(&mut geo, [0.45, 0.65, 0.95], 0.05);
    let plane = height * width;
    let mut base = vec![[0.0; 3]; plane];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let block = blocks.iter().find(|b| x >= b.x0 && x < b.x1).expect("blocks tile the row");
            let texture: f64 = geo.random_range(-1.0..1.0);
            base[i] = match mask[i] {
                ROAD => {
                    let lane = road_at(y).is_some_and(|(c, _)| (x as f64 + 0.5 - c).abs() < 0.8 && (y / 3) % 2 == 0);
                    if lane {
                        [0.9, 0.9, 0.85]
                    } else {
                        road_color.map(|v| v + 0.03 * texture)
                    }
                }
                SIDEWALK => walk_color.map(|v| v + 0.04 * texture),
                BUILDING => {
                    let window = (y % 4 == 1) && (x % 3 == 1);
                    if window {
                        block.color.map(|v| v * 0.45)
                    } else {
                        block.color.map(|v| v + 0.03 * texture)
                    }
                }
                VEGETATION => {
                    let g = 0.08 * texture;
                    [block.color[0] + g * 0.5, block.color[1] + g, block.color[2] + g * 0.3]
                }
                SKY => {
                    let t = y as f64 / h;
                    let c = if domain.weather == Weather::Rainy { RAIN_SKY } else { sky_top };
                    c.map(|v| v + (1.0 - v) * 0.5 * t + 0.01 * texture)
                }
                _ => [0.0; 3],
            };
        }
    }
    for &(x0, x1, y0, y1, color) in &vehicles {
        for y in y0..y1 {
            for x in x0..x1 {
                let window = y < y0 + (y1 - y0) / 3;
                base[y * width + x] = if window { color.map(|v| v * 0.3) } else { color };
            }
        }
    }

    // style pass
    let mut style = keyed(Stream::Scene, &[seed, 1]);
    let noise = Normal::new(0.0, domain.noise_sigma.max(0.0)).map_err(|e| Error::Config(e.to_string()))?;
    let j = domain.lighting_jitter;
    let brightness = domain.brightness * (j * style.random_range(-1.0..=1.0)).exp();
    let desaturation = (domain.desaturation + j * style.random_range(0.0..=1.0)).min(1.0);
    let tint = domain.tint.map(|t| t * (1.0 + 0.3 * j * style.random_range(-1.0..=1.0)));
    let mut img = Image::filled(height, width, [0.0; 3]);
    for (i, rgb) in base.iter().enumerate() {
        let mut v = [0.0; 3];
        for c in 0..3 {
            let t = rgb[c].clamp(0.0, 1.0) * tint[c];
            v[c] = ((t - 0.5) * domain.contrast + 0.5) * brightness;
        }
        let gray = (v[0] + v[1] + v[2]) / 3.0;
        for c in &mut v {
            *c = gray + (1.0 - desaturation) * (*c - gray);
            *c = (*c + noise.sample(&mut style)).clamp(0.0, 1.0);
        }
        img.set_pixel(i, v);
    }
    debug_assert!(mask.iter().all(|&m| (m as usize) < NUM_CLASSES));
    Ok((img, Mask::new(height, width, mask)?))
}
