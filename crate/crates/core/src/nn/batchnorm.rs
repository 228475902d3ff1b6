//! Spatial batch normalization, `y = gamma * (x - mean) / sqrt(var + eps) + beta`.
//!
//! Variance is the population (biased) estimate, both for normalization and
//! for the running statistics.

/// Per-channel mean and population variance over (batch, height, width).
pub fn channel_stats(x: &[f64], batch: usize, channels: usize, plane: usize) -> (Vec<f64>, Vec<f64>) {
    let n = (batch * plane) as f64;
    let mut mean = vec![0.0; channels];
    let mut var = vec![0.0; channels];
    for c in 0..channels {
        let mut s = 0.0;
        for b in 0..batch {
            s += x[(b * channels + c) * plane..][..plane].iter().sum::<f64>();
        }
        let mu = s / n;
        let mut ss = 0.0;
        for b in 0..batch {
            ss += x[(b * channels + c) * plane..][..plane]
                .iter()
                .map(|v| (v - mu) * (v - mu))
                .sum::<f64>();
        }
        mean[c] = mu;
        var[c] = ss / n;
    }
    (mean, var)
}

/// Normalizes in place with the given statistics and returns the normalized
/// values before the affine transform (needed by the backward pass).
#[allow(clippy::too_many_arguments)]
pub fn normalize(
    x: &mut [f64],
    batch: usize,
    channels: usize,
    plane: usize,
    mean: &[f64],
    var: &[f64],
    affine: &[f64],
    eps: f64,
    keep_xhat: bool,
) -> (Vec<f64>, Vec<f64>) {
    let (gamma, beta) = affine.split_at(channels);
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();
    let mut xhat = if keep_xhat { vec![0.0; x.len()] } else { Vec::new() };
    for b in 0..batch {
        for c in 0..channels {
            let off = (b * channels + c) * plane;
            let (mu, is, g, bt) = (mean[c], inv_std[c], gamma[c], beta[c]);
            for i in off..off + plane {
                let h = (x[i] - mu) * is;
                if keep_xhat {
                    xhat[i] = h;
                }
                x[i] = g * h + bt;
            }
        }
    }
    (xhat, inv_std)
}

/// Backward through batch-statistics normalization. Returns (dx, d[gamma‖beta]).
pub fn backward(
    dy: &[f64],
    xhat: &[f64],
    inv_std: &[f64],
    affine: &[f64],
    batch: usize,
    channels: usize,
    plane: usize,
) -> (Vec<f64>, Vec<f64>) {
    let n = (batch * plane) as f64;
    let gamma = &affine[..channels];
    let mut daff = vec![0.0; 2 * channels];
    for c in 0..channels {
        let (mut dg, mut db) = (0.0, 0.0);
        for b in 0..batch {
            let off = (b * channels + c) * plane;
            for i in off..off + plane {
                dg += dy[i] * xhat[i];
                db += dy[i];
            }
        }
        daff[c] = dg;
        daff[channels + c] = db;
    }
    let mut dx = vec![0.0; dy.len()];
    for c in 0..channels {
        let (dg, db) = (daff[c], daff[channels + c]);
        let scale = gamma[c] * inv_std[c] / n;
        for b in 0..batch {
            let off = (b * channels + c) * plane;
            for i in off..off + plane {
                dx[i] = scale * (n * dy[i] - db - xhat[i] * dg);
            }
        }
    }
    (dx, daff)
}

/// `running <- (1 - momentum) * running + momentum * batch` for mean‖var.
pub fn update_running(stat: &mut [f64], mean: &[f64], var: &[f64], momentum: f64) {
    let c = mean.len();
    for i in 0..c {
        stat[i] = (1.0 - momentum) * stat[i] + momentum * mean[i];
        stat[c + i] = (1.0 - momentum) * stat[c + i] + momentum * var[i];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_value_channel() {
        // channel values {1, 2, 3}: mean 2, population variance 2/3
        let mut x = vec![1.0, 2.0, 3.0];
        let (mean, var) = channel_stats(&x, 3, 1, 1);
        assert_eq!(mean, vec![2.0]);
        assert!((var[0] - 2.0 / 3.0).abs() < 1e-15);
        normalize(&mut x, 3, 1, 1, &mean, &var, &[1.0, 0.0], 1e-5, false);
        let want = 1.0 / (2.0f64 / 3.0 + 1e-5).sqrt();
        assert!((x[0] + want).abs() < 1e-12);
        assert_eq!(x[1], 0.0);
        assert!((x[2] - want).abs() < 1e-12);
        assert!((x[2] - 1.2247).abs() < 1e-4);
    }

    #[test]
    fn output_moments_follow_affine() {
        let (batch, channels, plane) = (4, 3, 25);
        let mut x: Vec<f64> = (0..batch * channels * plane)
            .map(|i| ((i * 37) % 101) as f64 * 0.13 - 4.0)
            .collect();
        let affine = [2.0, -0.5, 1.0, 0.3, -1.0, 4.0];
        let (mean, var) = channel_stats(&x, batch, channels, plane);
        normalize(&mut x, batch, channels, plane, &mean, &var, &affine, 1e-5, false);
        let (m2, v2) = channel_stats(&x, batch, channels, plane);
        for c in 0..channels {
            assert!((m2[c] - affine[channels + c]).abs() < 1e-3);
            assert!((v2[c].sqrt() - affine[c].abs()).abs() < 1e-3);
        }
    }

    #[test]
    fn running_update() {
        let mut stat = vec![0.0, 1.0];
        update_running(&mut stat, &[2.0], &[3.0], 0.1);
        assert!((stat[0] - 0.2).abs() < 1e-15);
        assert!((stat[1] - 1.2).abs() < 1e-15);
    }
}
