//! Two-dimensional FFT plumbing on row-major buffers.

use crate::C64;
use rustfft::{Fft, FftPlanner};
use std::sync::Arc;

/// Unnormalized forward/inverse transforms of an `n_rows × n_cols`
/// row-major buffer along either axis.
pub(crate) struct Fft2 {
    rows: usize,
    cols: usize,
    fr: Arc<dyn Fft<f64>>,
    fri: Arc<dyn Fft<f64>>,
    fc: Arc<dyn Fft<f64>>,
    fci: Arc<dyn Fft<f64>>,
}

impl Fft2 {
    pub fn new(rows: usize, cols: usize) -> Self {
        let mut p = FftPlanner::new();
        Fft2 {
            rows,
            cols,
            fr: p.plan_fft_forward(rows),
            fri: p.plan_fft_inverse(rows),
            fc: p.plan_fft_forward(cols),
            fci: p.plan_fft_inverse(cols),
        }
    }

    /// Transform every row (contiguous, along the column index).
    pub fn along_cols(&self, buf: &mut [C64], inverse: bool) {
        if inverse {
            self.fci.process(buf)
        } else {
            self.fc.process(buf)
        }
    }

    /// Transform every column (strided, along the row index).
    pub fn along_rows(&self, buf: &mut [C64], inverse: bool) {
        let (r, c) = (self.rows, self.cols);
        let mut t = vec![C64::new(0.0, 0.0); r * c];
        for a in 0..r {
            for b in 0..c {
                t[b * r + a] = buf[a * c + b];
            }
        }
        if inverse {
            self.fri.process(&mut t)
        } else {
            self.fr.process(&mut t)
        }
        for a in 0..r {
            for b in 0..c {
                buf[a * c + b] = t[b * r + a];
            }
        }
    }

    pub fn both(&self, buf: &mut [C64], inverse: bool) {
        self.along_rows(buf, inverse);
        self.along_cols(buf, inverse);
    }
}

/// Linear (non-periodic) convolution `out[a] = Σ_c k(a−c) u[c]` for
/// `a, c ∈ 0..n` via zero padding to `2n`; `k(p)` is supplied for
/// `p ∈ (−n, n)`.
pub(crate) fn linear_convolution_1d(u: &[f64], k: impl Fn(isize) -> f64) -> Vec<f64> {
    let n = u.len();
    let m = 2 * n;
    let mut p = FftPlanner::new();
    let (f, fi) = (p.plan_fft_forward(m), p.plan_fft_inverse(m));
    let mut a: Vec<C64> = (0..m).map(|i| C64::new(if i < n { u[i] } else { 0.0 }, 0.0)).collect();
    let mut b: Vec<C64> = (0..m)
        .map(|i| {
            let lag = if i < n {
                i as isize
            } else if i == n {
                return C64::new(0.0, 0.0);
            } else {
                i as isize - m as isize
            };
            C64::new(k(lag), 0.0)
        })
        .collect();
    f.process(&mut a);
    f.process(&mut b);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    fi.process(&mut a);
    a[..n].iter().map(|z| z.re / m as f64).collect()
}

/// Two-dimensional analogue of [`linear_convolution_1d`] for an
/// `nr × nc` row-major array.
pub(crate) fn linear_convolution_2d(u: &[f64], nr: usize, nc: usize, k: impl Fn(isize, isize) -> f64) -> Vec<f64> {
    let (mr, mc) = (2 * nr, 2 * nc);
    let lag = |i: usize, n: usize, m: usize| -> Option<isize> {
        if i < n {
            Some(i as isize)
        } else if i == n {
            None
        } else {
            Some(i as isize - m as isize)
        }
    };
    let mut a = vec![C64::new(0.0, 0.0); mr * mc];
    for r in 0..nr {
        for c in 0..nc {
            a[r * mc + c] = C64::new(u[r * nc + c], 0.0);
        }
    }
    let mut b = vec![C64::new(0.0, 0.0); mr * mc];
    for r in 0..mr {
        for c in 0..mc {
            if let (Some(p), Some(q)) = (lag(r, nr, mr), lag(c, nc, mc)) {
                b[r * mc + c] = C64::new(k(p, q), 0.0);
            }
        }
    }
    let f = Fft2::new(mr, mc);
    f.both(&mut a, false);
    f.both(&mut b, false);
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    f.both(&mut a, true);
    let scale = 1.0 / (mr * mc) as f64;
    let mut out = Vec::with_capacity(nr * nc);
    for r in 0..nr {
        for c in 0..nc {
            out.push(a[r * mc + c].re * scale);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_convolutions_match_direct_sums() {
        let u: Vec<f64> = (0..16).map(|i| ((i * 7) % 5) as f64 - 1.5).collect();
        let k = |p: isize| (p as f64 * 0.3).sin() + 0.1 * p as f64;
        let fast = linear_convolution_1d(&u, k);
        for a in 0..16 {
            let direct: f64 = (0..16).map(|c| k(a as isize - c as isize) * u[c]).sum();
            assert!((fast[a] - direct).abs() < 1e-11);
        }
        let (nr, nc) = (8, 16);
        let u2: Vec<f64> = (0..nr * nc).map(|i| ((i * 13) % 7) as f64 * 0.1).collect();
        let k2 = |p: isize, q: isize| (-(p * p) as f64 / 9.0).exp() * (q as f64 * 0.2).cos();
        let fast2 = linear_convolution_2d(&u2, nr, nc, k2);
        for r in 0..nr {
            for c in 0..nc {
                let mut d = 0.0;
                for rr in 0..nr {
                    for cc in 0..nc {
                        d += k2(r as isize - rr as isize, c as isize - cc as isize) * u2[rr * nc + cc];
                    }
                }
                assert!((fast2[r * nc + c] - d).abs() < 1e-11);
            }
        }
    }
}
