//! Small dense complex helpers on top of ndarray's real GEMM.

use ndarray::linalg::general_mat_mul;
use ndarray::Array2;

/// A dense complex matrix stored as separate real and imaginary planes.
#[derive(Clone, Debug)]
pub(crate) struct CMat {
    pub re: Array2<f64>,
    pub im: Array2<f64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat { re: Array2::zeros((rows, cols)), im: Array2::zeros((rows, cols)) }
    }

    pub fn rows(&self) -> usize {
        self.re.nrows()
    }

    pub fn cols(&self) -> usize {
        self.re.ncols()
    }

    /// Fill row `r` with `coef * exp(i (start + k*step) * arg)` for k = 0..cols
    /// using a rotation recurrence (one `sin_cos` pair per row).
    pub fn fill_exp_row(&mut self, r: usize, coef: (f64, f64), start: f64, step: f64, arg: f64) {
        let (s0, c0) = (start * arg).sin_cos();
        let (ds, dc) = (step * arg).sin_cos();
        let (mut zr, mut zi) = (coef.0 * c0 - coef.1 * s0, coef.0 * s0 + coef.1 * c0);
        let cols = self.cols();
        let mut re = self.re.row_mut(r);
        let mut im = self.im.row_mut(r);
        for k in 0..cols {
            re[k] = zr;
            im[k] = zi;
            let nr = zr * dc - zi * ds;
            zi = zr * ds + zi * dc;
            zr = nr;
        }
    }

    /// Fill column `c` analogously to [`CMat::fill_exp_row`].
    pub fn fill_exp_col(&mut self, c: usize, coef: (f64, f64), start: f64, step: f64, arg: f64) {
        let (s0, c0) = (start * arg).sin_cos();
        let (ds, dc) = (step * arg).sin_cos();
        let (mut zr, mut zi) = (coef.0 * c0 - coef.1 * s0, coef.0 * s0 + coef.1 * c0);
        for r in 0..self.rows() {
            self.re[[r, c]] = zr;
            self.im[[r, c]] = zi;
            let nr = zr * dc - zi * ds;
            zi = zr * ds + zi * dc;
            zr = nr;
        }
    }
}

/// `out += a · b` for complex matrices (four real GEMMs).
pub(crate) fn cgemm_acc(a: &CMat, b: &CMat, out: &mut CMat) {
    general_mat_mul(1.0, &a.re, &b.re, 1.0, &mut out.re);
    general_mat_mul(-1.0, &a.im, &b.im, 1.0, &mut out.re);
    general_mat_mul(1.0, &a.re, &b.im, 1.0, &mut out.im);
    general_mat_mul(1.0, &a.im, &b.re, 1.0, &mut out.im);
}

/// `a · b` for complex matrices.
pub(crate) fn cgemm(a: &CMat, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.rows(), b.cols());
    cgemm_acc(a, b, &mut out);
    out
}

/// `out += aᵀ · b` where `a_t` is stored transposed (inner dimension first).
pub(crate) fn cgemm_tn_acc(a_t: &CMat, b: &CMat, out: &mut CMat) {
    general_mat_mul(1.0, &a_t.re.t(), &b.re, 1.0, &mut out.re);
    general_mat_mul(-1.0, &a_t.im.t(), &b.im, 1.0, &mut out.re);
    general_mat_mul(1.0, &a_t.re.t(), &b.im, 1.0, &mut out.im);
    general_mat_mul(1.0, &a_t.im.t(), &b.re, 1.0, &mut out.im);
}

/// `a · b` where `a` is real and `b` is complex (two real GEMMs).
pub(crate) fn cgemm_real_lhs(a: &Array2<f64>, b: &CMat) -> CMat {
    let mut out = CMat::zeros(a.nrows(), b.cols());
    general_mat_mul(1.0, a, &b.re, 0.0, &mut out.re);
    general_mat_mul(1.0, a, &b.im, 0.0, &mut out.im);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exp_row_recurrence_matches_direct_evaluation() {
        let mut m = CMat::zeros(1, 257);
        m.fill_exp_row(0, (0.5, -0.25), -32.0, 0.25, 3.7);
        for k in 0..257 {
            let w = -32.0 + 0.25 * k as f64;
            let z = num_complex::Complex64::new(0.5, -0.25) * num_complex::Complex64::from_polar(1.0, w * 3.7);
            assert!((m.re[[0, k]] - z.re).abs() < 1e-12);
            assert!((m.im[[0, k]] - z.im).abs() < 1e-12);
        }
    }

    #[test]
    fn complex_product_matches_naive() {
        let mut a = CMat::zeros(3, 4);
        let mut b = CMat::zeros(4, 2);
        for r in 0..3 {
            a.fill_exp_row(r, (1.0, 0.0), 0.1, 0.3, r as f64 + 0.5);
        }
        for c in 0..2 {
            b.fill_exp_col(c, (0.0, 1.0), -0.2, 0.7, c as f64 - 0.3);
        }
        let p = cgemm(&a, &b);
        for r in 0..3 {
            for c in 0..2 {
                let mut acc = num_complex::Complex64::new(0.0, 0.0);
                for k in 0..4 {
                    acc +=
                        num_complex::Complex64::new(a.re[[r, k]], a.im[[r, k]]) * num_complex::Complex64::new(b.re[[k, c]], b.im[[k, c]]);
                }
                assert!((acc.re - p.re[[r, c]]).abs() < 1e-13);
                assert!((acc.im - p.im[[r, c]]).abs() < 1e-13);
            }
        }
    }
}
