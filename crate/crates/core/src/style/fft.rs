//! 2-D FFT split into amplitude and phase.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Planned forward and inverse transforms for one (height, width).
pub struct Fft2 {
    height: usize,
    width: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(height: usize, width: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            height,
            width,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let (h, w) = (self.height, self.width);
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(buf);
        let mut column = vec![Complex64::default(); h];
        for x in 0..w {
            for y in 0..h {
                column[y] = buf[y * w + x];
            }
            col.process(&mut column);
            for y in 0..h {
                buf[y * w + x] = column[y];
            }
        }
        if inverse {
            let scale = 1.0 / (h * w) as f64;
            buf.iter_mut().for_each(|v| *v *= scale);
        }
    }

    /// Returns (|F(x)|, arg F(x)), both row-major (height, width).
    pub fn decompose(&self, channel: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if channel.len() != self.height * self.width {
            return Err(Error::Dimension(format!(
                "channel of {} values for a {}x{} transform",
                channel.len(),
                self.height,
                self.width
            )));
        }
        if channel.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite value in FFT input".into()));
        }
        let mut buf: Vec<Complex64> = channel.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut buf, false);
        Ok((buf.iter().map(|c| c.norm()).collect(), buf.iter().map(|c| c.arg()).collect()))
    }

    /// Real part of the inverse transform of `amplitude * exp(i * phase)`.
    pub fn recompose(&self, amplitude: &[f64], phase: &[f64]) -> Vec<f64> {
        let mut buf: Vec<Complex64> = amplitude
            .iter()
            .zip(phase)
            .map(|(&a, &p)| Complex64::from_polar(a, p))
            .collect();
        self.transform(&mut buf, true);
        buf.iter().map(|c| c.re).collect()
    }
}

pub fn fft2_decompose(channel: &[f64], height: usize, width: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    Fft2::new(height, width).decompose(channel)
}

pub fn fft2_recompose(amplitude: &[f64], phase: &[f64], height: usize, width: usize) -> Vec<f64> {
    Fft2::new(height, width).recompose(amplitude, phase)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_image_has_only_dc() {
        let (h, w) = (6, 8);
        let (amp, _) = fft2_decompose(&vec![0.3; h * w], h, w).unwrap();
        assert!((amp[0] - 0.3 * (h * w) as f64).abs() < 1e-12);
        assert!(amp[1..].iter().all(|&a| a < 1e-12));
    }

    #[test]
    fn roundtrip_and_hermitian_symmetry() {
        let (h, w) = (16, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x: Vec<f64> = (0..h * w).map(|_| rng.random()).collect();
        let (amp, phase) = fft2_decompose(&x, h, w).unwrap();
        assert!(amp.iter().all(|&a| a >= 0.0));
        let back = fft2_recompose(&amp, &phase, h, w);
        let err = x.iter().zip(&back).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        for u in 0..h {
            for v in 0..w {
                let (nu, nv) = ((h - u) % h, (w - v) % w);
                assert!((amp[u * w + v] - amp[nu * w + nv]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn rejects_wrong_length() {
        assert!(fft2_decompose(&[0.0; 5], 2, 3).is_err());
    }
}
