use super::gemm::gemm;

/// Square convolution without bias, zero padding of `kernel / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Conv2d {
    pub cin: usize,
    pub cout: usize,
    pub kernel: usize,
    pub stride: usize,
}

impl Conv2d {
    pub fn pad(&self) -> usize {
        self.kernel / 2
    }

    pub fn out_size(&self, h: usize, w: usize) -> (usize, usize) {
        let p = self.pad();
        (
            (h + 2 * p - self.kernel) / self.stride + 1,
            (w + 2 * p - self.kernel) / self.stride + 1,
        )
    }

    fn col_rows(&self) -> usize {
        self.cin * self.kernel * self.kernel
    }

    fn is_pointwise(&self) -> bool {
        self.kernel == 1 && self.stride == 1
    }

    fn im2col(&self, x: &[f64], h: usize, w: usize, col: &mut [f64]) {
        let (ho, wo) = self.out_size(h, w);
        let (k, s, p) = (self.kernel, self.stride, self.pad() as isize);
        let plane = ho * wo;
        for ci in 0..self.cin {
            let xc = &x[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &mut col[((ci * k + ky) * k + kx) * plane..][..plane];
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - p;
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        if iy < 0 || iy >= h as isize {
                            dst.fill(0.0);
                            continue;
                        }
                        let src = &xc[iy as usize * w..(iy as usize + 1) * w];
                        for (ox, d) in dst.iter_mut().enumerate() {
                            let ix = (ox * s + kx) as isize - p;
                            *d = if ix < 0 || ix >= w as isize { 0.0 } else { src[ix as usize] };
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, col: &[f64], h: usize, w: usize, dx: &mut [f64]) {
        let (ho, wo) = self.out_size(h, w);
        let (k, s, p) = (self.kernel, self.stride, self.pad() as isize);
        let plane = ho * wo;
        for ci in 0..self.cin {
            let dxc = &mut dx[ci * h * w..(ci + 1) * h * w];
            for ky in 0..k {
                for kx in 0..k {
                    let row = &col[((ci * k + ky) * k + kx) * plane..][..plane];
                    for oy in 0..ho {
                        let iy = (oy * s + ky) as isize - p;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        let dst = &mut dxc[iy as usize * w..(iy as usize + 1) * w];
                        for ox in 0..wo {
                            let ix = (ox * s + kx) as isize - p;
                            if ix >= 0 && ix < w as isize {
                                dst[ix as usize] += row[oy * wo + ox];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Forward pass over a batch. Returns the output and the column buffers
    /// the backward pass needs.
    pub fn forward(&self, x: &[f64], batch: usize, h: usize, w: usize, weight: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (ho, wo) = self.out_size(h, w);
        let plane = ho * wo;
        let kk = self.col_rows();
        let mut y = vec![0.0; batch * self.cout * plane];
        let mut cols = if self.is_pointwise() {
            Vec::new()
        } else {
            vec![0.0; batch * kk * plane]
        };
        for b in 0..batch {
            let xb = &x[b * self.cin * h * w..(b + 1) * self.cin * h * w];
            let yb = &mut y[b * self.cout * plane..(b + 1) * self.cout * plane];
            if self.is_pointwise() {
                gemm(self.cout, kk, plane, weight, false, xb, false, yb, 0.0);
            } else {
                let col = &mut cols[b * kk * plane..(b + 1) * kk * plane];
                self.im2col(xb, h, w, col);
                gemm(self.cout, kk, plane, weight, false, col, false, yb, 0.0);
            }
        }
        (y, cols)
    }

    /// Backward pass. `input` is only read for pointwise convolutions, which
    /// keep no column buffers. Returns (dweight, dinput); dinput is skipped
    /// when `need_dx` is false.
    #[allow(clippy::too_many_arguments)]
    pub fn backward(
        &self,
        dy: &[f64],
        cols: &[f64],
        input: &[f64],
        batch: usize,
        h: usize,
        w: usize,
        weight: &[f64],
        need_dx: bool,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let (ho, wo) = self.out_size(h, w);
        let plane = ho * wo;
        let kk = self.col_rows();
        let mut dw = vec![0.0; self.cout * kk];
        let mut dx = need_dx.then(|| vec![0.0; batch * self.cin * h * w]);
        let mut dcol = vec![0.0; kk * plane];
        for b in 0..batch {
            let dyb = &dy[b * self.cout * plane..(b + 1) * self.cout * plane];
            let col = if self.is_pointwise() {
                &input[b * self.cin * h * w..(b + 1) * self.cin * h * w]
            } else {
                &cols[b * kk * plane..(b + 1) * kk * plane]
            };
            gemm(self.cout, plane, kk, dyb, false, col, true, &mut dw, 1.0);
            if let Some(dx) = dx.as_mut() {
                let dxb = &mut dx[b * self.cin * h * w..(b + 1) * self.cin * h * w];
                if self.is_pointwise() {
                    gemm(kk, self.cout, plane, weight, true, dyb, false, dxb, 1.0);
                } else {
                    gemm(kk, self.cout, plane, weight, true, dyb, false, &mut dcol, 0.0);
                    self.col2im(&dcol, h, w, dxb);
                }
            }
        }
        (dw, dx)
    }
}
