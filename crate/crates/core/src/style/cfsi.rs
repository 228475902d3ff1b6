//! Continuous frequency-space interpolation: blends the low-frequency
//! amplitude of an image toward a target spectrum, keeping its phase.

use super::fft::Fft2;
use crate::data::Image;
use crate::error::{Error, Result};

/// Half-width of the DC-centered square window whose side is
/// `floor(beta_win * min(h, w))`, or `None` when that side is zero.
///
/// The window must be point-symmetric around DC so that the blended spectrum
/// stays Hermitian. An odd side is used as is; an even side loses one row and
/// column (side `s - 1`).
pub fn window_radius(beta_win: f64, height: usize, width: usize) -> Option<usize> {
    let side = (beta_win * height.min(width) as f64).floor() as usize;
    (side > 0).then(|| (side - 1) / 2)
}

/// Flat indices of the window frequencies in unshifted FFT layout.
pub fn window_indices(radius: usize, height: usize, width: usize) -> Vec<usize> {
    let r = radius as isize;
    let mut out = Vec::with_capacity((2 * radius + 1).pow(2));
    for fu in -r..=r {
        let u = fu.rem_euclid(height as isize) as usize;
        for fv in -r..=r {
            let v = fv.rem_euclid(width as isize) as usize;
            out.push(u * width + v);
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

fn check(source: &Image, target_amplitude: &[f64], lambda: f64, beta_win: f64) -> Result<()> {
    if target_amplitude.len() != source.data.len() {
        return Err(Error::Argument(format!(
            "target spectrum has {} values, image has {}",
            target_amplitude.len(),
            source.data.len()
        )));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::Argument(format!("lambda {lambda} outside [0, 1]")));
    }
    if !(beta_win > 0.0 && beta_win <= 0.5) {
        return Err(Error::Argument(format!("beta_win {beta_win} outside (0, 0.5]")));
    }
    Ok(())
}

/// Interpolated image before clamping to [0, 1].
pub fn cfsi_translate_unclamped(
    fft: &Fft2,
    source: &Image,
    target_amplitude: &[f64],
    lambda: f64,
    beta_win: f64,
) -> Result<Image> {
    check(source, target_amplitude, lambda, beta_win)?;
    let (h, w) = (source.height, source.width);
    let window = window_radius(beta_win, h, w)
        .map(|r| window_indices(r, h, w))
        .unwrap_or_default();
    let plane = h * w;
    let mut out = source.clone();
    for c in 0..3 {
        let (mut amp, phase) = fft.decompose(source.channel(c))?;
        let target = &target_amplitude[c * plane..(c + 1) * plane];
        for &i in &window {
            amp[i] = (1.0 - lambda) * amp[i] + lambda * target[i];
        }
        out.channel_mut(c).copy_from_slice(&fft.recompose(&amp, &phase));
    }
    Ok(out)
}

pub fn cfsi_translate(source: &Image, target_amplitude: &[f64], lambda: f64, beta_win: f64) -> Result<Image> {
    let fft = Fft2::new(source.height, source.width);
    let mut out = cfsi_translate_unclamped(&fft, source, target_amplitude, lambda, beta_win)?;
    out.data.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
    Ok(out)
}

/// Amplitude spectra of the three channels, concatenated.
pub fn amplitude_spectrum(fft: &Fft2, image: &Image) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(image.data.len());
    for c in 0..3 {
        out.extend(fft.decompose(image.channel(c))?.0);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::new(h, w, (0..3 * h * w).map(|_| rng.random_range(0.2..0.8)).collect()).unwrap()
    }

    fn max_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn window_sizes() {
        assert_eq!(window_radius(0.1, 64, 64), Some(2));
        assert_eq!(window_radius(0.1, 32, 48), Some(1));
        assert_eq!(window_radius(0.1, 8, 8), None);
        assert_eq!(window_indices(1, 8, 8), vec![0, 1, 7, 8, 9, 15, 56, 57, 63]);
    }

    #[test]
    fn zero_lambda_and_own_spectrum_are_identities() {
        let fft = Fft2::new(16, 16);
        let src = random_image(16, 16, 1);
        let tgt = amplitude_spectrum(&fft, &random_image(16, 16, 2)).unwrap();
        let out = cfsi_translate(&src, &tgt, 0.0, 0.5).unwrap();
        assert!(max_diff(&out.data, &src.data) < 1e-5);
        let own = amplitude_spectrum(&fft, &src).unwrap();
        let out = cfsi_translate(&src, &own, 0.7, 0.5).unwrap();
        assert!(max_diff(&out.data, &src.data) < 1e-5);
    }

    #[test]
    fn window_amplitude_is_the_convex_combination() {
        let (h, w) = (16, 16);
        let fft = Fft2::new(h, w);
        let src = random_image(h, w, 3);
        let a_src = amplitude_spectrum(&fft, &src).unwrap();
        let a_tgt = amplitude_spectrum(&fft, &random_image(h, w, 4)).unwrap();
        let window = window_indices(window_radius(0.4, h, w).unwrap(), h, w);
        for lambda in [0.0, 0.3, 1.0] {
            let out = cfsi_translate_unclamped(&fft, &src, &a_tgt, lambda, 0.4).unwrap();
            let a_out = amplitude_spectrum(&fft, &out).unwrap();
            for c in 0..3 {
                for i in 0..h * w {
                    let k = c * h * w + i;
                    let want = if window.contains(&i) {
                        (1.0 - lambda) * a_src[k] + lambda * a_tgt[k]
                    } else {
                        a_src[k]
                    };
                    assert!((a_out[k] - want).abs() < 1e-5, "lambda {lambda} c {c} i {i}");
                }
            }
        }
    }

    #[test]
    fn argument_errors() {
        let src = random_image(8, 8, 0);
        assert!(cfsi_translate(&src, &[0.0; 5], 0.5, 0.1).is_err());
        assert!(cfsi_translate(&src, &vec![0.0; 192], 1.5, 0.1).is_err());
        assert!(cfsi_translate(&src, &vec![0.0; 192], 0.5, 0.0).is_err());
    }
}
