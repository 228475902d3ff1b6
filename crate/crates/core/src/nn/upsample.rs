//! Bilinear upsampling by an integer factor, half-pixel centers, edge clamped.

#[derive(Debug, Clone)]
struct Taps {
    lo: Vec<usize>,
    hi: Vec<usize>,
    frac: Vec<f64>,
}

fn taps(input: usize, factor: usize) -> Taps {
    let out = input * factor;
    let mut t = Taps {
        lo: Vec::with_capacity(out),
        hi: Vec::with_capacity(out),
        frac: Vec::with_capacity(out),
    };
    for o in 0..out {
        let src = ((o as f64 + 0.5) / factor as f64 - 0.5).max(0.0);
        let lo = (src.floor() as usize).min(input - 1);
        let hi = (lo + 1).min(input - 1);
        t.lo.push(lo);
        t.hi.push(hi);
        t.frac.push(if hi == lo { 0.0 } else { src - lo as f64 });
    }
    t
}

#[derive(Debug, Clone)]
pub struct Upsample {
    factor: usize,
    h: usize,
    w: usize,
    ty: Taps,
    tx: Taps,
}

impl Upsample {
    pub fn new(h: usize, w: usize, factor: usize) -> Self {
        Self {
            factor,
            h,
            w,
            ty: taps(h, factor),
            tx: taps(w, factor),
        }
    }

    pub fn out_size(&self) -> (usize, usize) {
        (self.h * self.factor, self.w * self.factor)
    }

    /// `planes` independent (h, w) planes in, the same count of upsampled planes out.
    pub fn forward(&self, x: &[f64], planes: usize) -> Vec<f64> {
        let (ho, wo) = self.out_size();
        let mut out = vec![0.0; planes * ho * wo];
        let mut rows = vec![0.0; self.h * wo];
        for p in 0..planes {
            let src = &x[p * self.h * self.w..(p + 1) * self.h * self.w];
            for y in 0..self.h {
                let s = &src[y * self.w..(y + 1) * self.w];
                for ox in 0..wo {
                    let f = self.tx.frac[ox];
                    rows[y * wo + ox] = (1.0 - f) * s[self.tx.lo[ox]] + f * s[self.tx.hi[ox]];
                }
            }
            let dst = &mut out[p * ho * wo..(p + 1) * ho * wo];
            for oy in 0..ho {
                let f = self.ty.frac[oy];
                let (a, b) = (self.ty.lo[oy] * wo, self.ty.hi[oy] * wo);
                for ox in 0..wo {
                    dst[oy * wo + ox] = (1.0 - f) * rows[a + ox] + f * rows[b + ox];
                }
            }
        }
        out
    }

    pub fn backward(&self, dy: &[f64], planes: usize) -> Vec<f64> {
        let (ho, wo) = self.out_size();
        let mut dx = vec![0.0; planes * self.h * self.w];
        let mut rows = vec![0.0; self.h * wo];
        for p in 0..planes {
            rows.fill(0.0);
            let g = &dy[p * ho * wo..(p + 1) * ho * wo];
            for oy in 0..ho {
                let f = self.ty.frac[oy];
                let (a, b) = (self.ty.lo[oy] * wo, self.ty.hi[oy] * wo);
                for ox in 0..wo {
                    let v = g[oy * wo + ox];
                    rows[a + ox] += (1.0 - f) * v;
                    rows[b + ox] += f * v;
                }
            }
            let d = &mut dx[p * self.h * self.w..(p + 1) * self.h * self.w];
            for y in 0..self.h {
                for ox in 0..wo {
                    let v = rows[y * wo + ox];
                    let f = self.tx.frac[ox];
                    d[y * self.w + self.tx.lo[ox]] += (1.0 - f) * v;
                    d[y * self.w + self.tx.hi[ox]] += f * v;
                }
            }
        }
        dx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_stays_constant() {
        let up = Upsample::new(3, 2, 4);
        let out = up.forward(&[2.5; 6], 1);
        assert_eq!(out.len(), 12 * 8);
        assert!(out.iter().all(|v| (v - 2.5).abs() < 1e-15));
    }

    #[test]
    fn linear_ramp_interior() {
        // half-pixel centers: output o samples input coordinate (o + 0.5) / 4 - 0.5
        let up = Upsample::new(1, 4, 4);
        let out = up.forward(&[0.0, 1.0, 2.0, 3.0], 1);
        assert_eq!(out[0], 0.0);
        assert!((out[4] - 0.625).abs() < 1e-15);
        assert!((out[8] - 1.625).abs() < 1e-15);
        assert_eq!(out[15], 3.0);
    }

    #[test]
    fn backward_is_adjoint() {
        let up = Upsample::new(3, 5, 4);
        let x: Vec<f64> = (0..30).map(|i| (i as f64 * 0.3).sin()).collect();
        let y = up.forward(&x, 2);
        let g: Vec<f64> = (0..y.len()).map(|i| (i as f64 * 0.17).cos()).collect();
        let dx = up.backward(&g, 2);
        let lhs: f64 = y.iter().zip(&g).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(&dx).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-10);
    }
}
