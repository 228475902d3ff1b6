//! sRGB ↔ CIELAB (D65) and per-image LAB statistics transfer.

use std::sync::LazyLock;

use crate::data::Image;

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

// Reference white = XYZ of linear (1, 1, 1), so white maps to a = b = 0 exactly.
static WHITE: LazyLock<[f64; 3]> = LazyLock::new(|| RGB_TO_XYZ.map(|row| row.iter().sum()));

static XYZ_TO_RGB: LazyLock<[[f64; 3]; 3]> = LazyLock::new(|| invert3(&RGB_TO_XYZ));

fn invert3(m: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let det = m[0][0] * cof(1, 2, 1, 2) - m[0][1] * cof(1, 2, 0, 2) + m[0][2] * cof(1, 2, 0, 1);
    let inv = 1.0 / det;
    [
        [cof(1, 2, 1, 2) * inv, -cof(0, 2, 1, 2) * inv, cof(0, 1, 1, 2) * inv],
        [-cof(1, 2, 0, 2) * inv, cof(0, 2, 0, 2) * inv, -cof(0, 1, 0, 2) * inv],
        [cof(1, 2, 0, 1) * inv, -cof(0, 2, 0, 1) * inv, cof(0, 1, 0, 1) * inv],
    ]
}

const DELTA: f64 = 6.0 / 29.0;

fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn linear_to_srgb(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

fn f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

pub fn rgb_to_lab(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(srgb_to_linear);
    let white = *WHITE;
    let xyz: Vec<f64> = (0..3)
        .map(|i| (0..3).map(|j| RGB_TO_XYZ[i][j] * lin[j]).sum::<f64>() / white[i])
        .collect();
    let (fx, fy, fz) = (f(xyz[0]), f(xyz[1]), f(xyz[2]));
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// Inverse of [`rgb_to_lab`], clamped to [0, 1].
pub fn lab_to_rgb(lab: [f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let white = *WHITE;
    let xyz = [f_inv(fx) * white[0], f_inv(fy) * white[1], f_inv(fz) * white[2]];
    let m = &*XYZ_TO_RGB;
    let mut out = [0.0; 3];
    for i in 0..3 {
        let lin: f64 = (0..3).map(|j| m[i][j] * xyz[j]).sum();
        out[i] = linear_to_srgb(lin).clamp(0.0, 1.0);
    }
    out
}

/// Per-pixel LAB values of an image.
pub fn image_to_lab(image: &Image) -> Vec<[f64; 3]> {
    (0..image.plane()).map(|i| rgb_to_lab(image.pixel(i))).collect()
}

pub fn lab_to_image(height: usize, width: usize, lab: &[[f64; 3]]) -> Image {
    let mut out = Image::filled(height, width, [0.0; 3]);
    for (i, &px) in lab.iter().enumerate() {
        out.set_pixel(i, lab_to_rgb(px));
    }
    out
}

/// Per-channel mean and population standard deviation.
pub fn lab_stats_of(lab: &[[f64; 3]]) -> ([f64; 3], [f64; 3]) {
    let n = lab.len() as f64;
    let mut mean = [0.0; 3];
    for px in lab {
        for c in 0..3 {
            mean[c] += px[c];
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = [0.0; 3];
    for px in lab {
        for c in 0..3 {
            var[c] += (px[c] - mean[c]).powi(2);
        }
    }
    (mean, var.map(|v| (v / n).sqrt()))
}

pub fn lab_stats(image: &Image) -> ([f64; 3], [f64; 3]) {
    lab_stats_of(&image_to_lab(image))
}

/// Channels whose standard deviation is at or below this are treated as constant.
pub const MIN_STD: f64 = 1e-9;

/// `(x - mean_s) / std_s * std_t + mean_t` per LAB channel, before conversion
/// back to RGB. Constant channels of the source pass through unchanged.
pub fn lab_translate_values(source: &Image, target_mean: [f64; 3], target_std: [f64; 3]) -> Vec<[f64; 3]> {
    let mut lab = image_to_lab(source);
    let (mean, std) = lab_stats_of(&lab);
    for c in 0..3 {
        if std[c] <= MIN_STD {
            continue;
        }
        let scale = target_std[c] / std[c];
        for px in lab.iter_mut() {
            px[c] = (px[c] - mean[c]) * scale + target_mean[c];
        }
    }
    lab
}

pub fn lab_translate(source: &Image, target_mean: [f64; 3], target_std: [f64; 3]) -> Image {
    lab_to_image(
        source.height,
        source.width,
        &lab_translate_values(source, target_mean, target_std),
    )
}
