//! Train-time geometric augmentation: random rescale, crop back to the
//! original size, random horizontal flip.

use rand::Rng;

use crate::data::{Image, Mask, IGNORE_INDEX};
use crate::rng::{keyed, Stream};

pub const SCALE_RANGE: (f64, f64) = (0.5, 2.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub scale: f64,
    /// Top-left corner of the crop in the rescaled image; negative offsets pad.
    pub offset_y: isize,
    pub offset_x: isize,
    pub flip: bool,
}

impl AugmentParams {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            offset_y: 0,
            offset_x: 0,
            flip: false,
        }
    }

    pub fn sample(seed: u64, height: usize, width: usize) -> Self {
        let mut rng = keyed(Stream::Augment, &[seed]);
        let scale = rng.random_range(SCALE_RANGE.0..=SCALE_RANGE.1);
        let (sh, sw) = scaled_size(height, width, scale);
        let mut offset = |s: usize, n: usize| {
            let (lo, hi) = if s >= n { (0, (s - n) as i64) } else { (s as i64 - n as i64, 0) };
            rng.random_range(lo..=hi) as isize
        };
        let offset_y = offset(sh, height);
        let offset_x = offset(sw, width);
        Self {
            scale,
            offset_y,
            offset_x,
            flip: rng.random_bool(0.5),
        }
    }
}

fn scaled_size(height: usize, width: usize, scale: f64) -> (usize, usize) {
    (
        ((height as f64 * scale).round() as usize).max(1),
        ((width as f64 * scale).round() as usize).max(1),
    )
}

fn source_coord(dst: usize, scale: f64, src_len: usize) -> (usize, usize, f64) {
    let s = ((dst as f64 + 0.5) / scale - 0.5).clamp(0.0, (src_len - 1) as f64);
    let i0 = s.floor() as usize;
    let i1 = (i0 + 1).min(src_len - 1);
    (i0, i1, s - i0 as f64)
}

pub fn apply_augment(image: &Image, mask: &Mask, p: &AugmentParams) -> (Image, Mask) {
    let (h, w) = (image.height, image.width);
    let (sh, sw) = scaled_size(h, w, p.scale);
    let sy = sh as f64 / h as f64;
    let sx = sw as f64 / w as f64;
    let mut out = Image::filled(h, w, [0.0; 3]);
    let mut labels = vec![IGNORE_INDEX; h * w];
    for y in 0..h {
        let ry = y as isize + p.offset_y;
        if ry < 0 || ry >= sh as isize {
            continue;
        }
        let (y0, y1, fy) = source_coord(ry as usize, sy, h);
        let ny = (((ry as f64 + 0.5) / sy) as usize).min(h - 1);
        for x in 0..w {
            let rx = x as isize + p.offset_x;
            if rx < 0 || rx >= sw as isize {
                continue;
            }
            let (x0, x1, fx) = source_coord(rx as usize, sx, w);
            let nx = (((rx as f64 + 0.5) / sx) as usize).min(w - 1);
            let i = y * w + x;
            for c in 0..3 {
                let ch = image.channel(c);
                let top = ch[y0 * w + x0] * (1.0 - fx) + ch[y0 * w + x1] * fx;
                let bot = ch[y1 * w + x0] * (1.0 - fx) + ch[y1 * w + x1] * fx;
                out.channel_mut(c)[i] = top * (1.0 - fy) + bot * fy;
            }
            labels[i] = mask.data[ny * w + nx];
        }
    }
    let mask = Mask {
        height: h,
        width: w,
        data: labels,
    };
    if p.flip {
        (out.flipped(), mask.flipped())
    } else {
        (out, mask)
    }
}

/// Samples parameters from the `Augment` stream keyed by `seed` and applies them.
pub fn augment_train(image: &Image, mask: &Mask, seed: u64) -> (Image, Mask) {
    apply_augment(image, mask, &AugmentParams::sample(seed, image.height, image.width))
}
