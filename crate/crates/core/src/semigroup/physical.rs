//! Periodic physical grids and the spectral realization of `P_t` and its
//! adjoint on them.
//!
//! Transforms use the `e^{-i}` DFT with wavenumbers `κ_a = π a / L` (`a`
//! folded to `[-n/2, n/2)`). The transport shear `η ↦ η − tξ` is applied
//! exactly by multiplying with `exp(±i t κ v)` in the mixed `(κ, v)`
//! representation.

use super::{noise_multiplier, Noise};
use crate::error::{Error, Result};
use crate::fft::Fft2;
use crate::linalg::{cgemm, cgemm_real_lhs, CMat};
use crate::spectral::{FrequencyGrid, SpectralField};
use crate::C64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

/// Periodic box `[-L_x, L_x) × [-L_v, L_v)` with `n_x × n_v` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalGrid {
    pub lx: f64,
    pub lv: f64,
    pub nx: usize,
    pub nv: usize,
}

impl PhysicalGrid {
    pub fn new(lx: f64, lv: f64, nx: usize, nv: usize) -> Result<Self> {
        if !(lx.is_finite() && lx > 0.0 && lv.is_finite() && lv > 0.0) {
            return Err(Error::invalid("box half-widths must be positive"));
        }
        if !(nx.is_power_of_two() && nv.is_power_of_two() && nx >= 8 && nv >= 8) {
            return Err(Error::invalid(format!("grid sizes must be powers of two ≥ 8, got {nx}×{nv}")));
        }
        Ok(PhysicalGrid { lx, lv, nx, nv })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.lx / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.lv / self.nv as f64
    }

    /// Cell area `dx·dv`.
    pub fn cell(&self) -> f64 {
        self.dx() * self.dv()
    }

    pub fn len(&self) -> usize {
        self.nx * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn x(&self, a: usize) -> f64 {
        -self.lx + a as f64 * self.dx()
    }

    pub fn v(&self, b: usize) -> f64 {
        -self.lv + b as f64 * self.dv()
    }

    pub fn kx(&self, a: usize) -> f64 {
        fold(a, self.nx) * PI / self.lx
    }

    pub fn kv(&self, b: usize) -> f64 {
        fold(b, self.nv) * PI / self.lv
    }

    /// Largest resolved position wavenumber.
    pub fn kx_max(&self) -> f64 {
        PI * self.nx as f64 / (2.0 * self.lx)
    }

    /// Largest resolved velocity wavenumber.
    pub fn kv_max(&self) -> f64 {
        PI * self.nv as f64 / (2.0 * self.lv)
    }

    fn check_shear(&self, t: f64) -> Result<()> {
        if t * self.kx_max() > self.kv_max() * (1.0 + 1e-12) {
            return Err(Error::invalid(format!(
                "shear t·κ_max = {} exceeds the velocity band {} (aliasing)",
                t * self.kx_max(),
                self.kv_max()
            )));
        }
        Ok(())
    }
}

fn fold(a: usize, n: usize) -> f64 {
    if a < n / 2 {
        a as f64
    } else {
        a as f64 - n as f64
    }
}

/// A real field sampled on a [`PhysicalGrid`], stored `x`-major.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalField {
    grid: PhysicalGrid,
    values: Vec<f64>,
}

impl PhysicalField {
    pub fn zeros(grid: PhysicalGrid) -> Self {
        PhysicalField { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: PhysicalGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for a in 0..grid.nx {
            for b in 0..grid.nv {
                values.push(f(grid.x(a), grid.v(b)));
            }
        }
        PhysicalField { grid, values }
    }

    pub fn from_values(grid: PhysicalGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!("{} values for {} nodes", values.len(), grid.len())));
        }
        Ok(PhysicalField { grid, values })
    }

    pub fn grid(&self) -> PhysicalGrid {
        self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, a: usize, b: usize) -> f64 {
        self.values[a * self.grid.nv + b]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Riemann sum `Σ values · cell`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell()
    }

    /// Discrete `L²` norm `(Σ values² · cell)^{1/2}`.
    pub fn l2_norm(&self) -> f64 {
        (self.values.iter().map(|v| v * v).sum::<f64>() * self.grid.cell()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ self·other·cell`.
    pub fn dot(&self, other: &PhysicalField) -> Result<f64> {
        self.same_grid(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * self.grid.cell())
    }

    pub(crate) fn same_grid(&self, other: &PhysicalField) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::Mismatch("fields on different physical grids".into()));
        }
        Ok(())
    }

    /// Pointwise `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &PhysicalField, b: f64) -> Result<PhysicalField> {
        self.same_grid(other)?;
        Ok(PhysicalField { grid: self.grid, values: self.values.iter().zip(&other.values).map(|(x, y)| a * x + b * y).collect() })
    }

    /// Spectral derivative in `v` (Nyquist mode dropped).
    pub fn dv_spectral(&self) -> PhysicalField {
        let g = self.grid;
        let plans = Plans::new(g);
        let mut buf = to_complex(&self.values);
        plans.fft_v(&mut buf, false);
        for a in 0..g.nx {
            for b in 0..g.nv {
                let k = if b == g.nv / 2 { 0.0 } else { g.kv(b) };
                buf[a * g.nv + b] *= C64::new(0.0, k);
            }
        }
        plans.fft_v(&mut buf, true);
        let scale = 1.0 / g.nv as f64;
        PhysicalField { grid: g, values: buf.iter().map(|z| z.re * scale).collect() }
    }

    /// Evaluates the trigonometric interpolant (Nyquist modes dropped) at
    /// arbitrary points.
    pub fn eval_at(&self, points: &[(f64, f64)]) -> Vec<f64> {
        let g = self.grid;
        let plans = Plans::new(g);
        let mut c = to_complex(&self.values);
        plans.fft_2d(&mut c, false);
        let scale = 1.0 / g.len() as f64;
        // coefficients as (nv × nx) so that rows of P·C pick up velocity sums
        let mut coef = CMat::zeros(g.nv, g.nx);
        for a in 0..g.nx {
            if a == g.nx / 2 {
                continue;
            }
            for b in 0..g.nv {
                if b == g.nv / 2 {
                    continue;
                }
                let z = c[a * g.nv + b] * scale;
                coef.re[[b, a]] = z.re;
                coef.im[[b, a]] = z.im;
            }
        }
        let mut out = Vec::with_capacity(points.len());
        for chunk in points.chunks(512) {
            let mut ev = CMat::zeros(chunk.len(), g.nv);
            for (r, &(_, v)) in chunk.iter().enumerate() {
                let s = v + g.lv;
                for b in 0..g.nv {
                    let z = C64::from_polar(1.0, g.kv(b) * s);
                    ev.re[[r, b]] = z.re;
                    ev.im[[r, b]] = z.im;
                }
            }
            let t = cgemm(&ev, &coef);
            for (r, &(x, _)) in chunk.iter().enumerate() {
                let s = x + g.lx;
                let mut acc = 0.0;
                for a in 0..g.nx {
                    let (sn, cs) = (g.kx(a) * s).sin_cos();
                    acc += t.re[[r, a]] * cs - t.im[[r, a]] * sn;
                }
                out.push(acc);
            }
        }
        out
    }

    /// The `+i` transform `Σ_ab f_ab cell · e^{i(ξ x_a + η v_b)}` on a
    /// frequency grid, by direct quadrature over the cells.
    ///
    /// The samples are read as a band-limited function: nodes beyond the
    /// grid's Nyquist frequencies `π/dx`, `π/dv` are set to zero, because
    /// the cell sum is periodic there and would return aliases of the
    /// low frequencies.
    pub fn transform(&self, grid: &Arc<FrequencyGrid>) -> SpectralField {
        let g = self.grid();
        let (nxi, neta) = (grid.n_xi(), grid.n_eta());
        let (hxi, heta) = grid.spacing();
        let mid = neta / 2;
        let half = mid + 1;
        let mut ev = CMat::zeros(g.nv, half);
        for b in 0..g.nv {
            ev.fill_exp_row(b, (1.0, 0.0), 0.0, heta, g.v(b));
        }
        let nu = ndarray::Array2::from_shape_vec((g.nx, g.nv), self.values().iter().map(|v| v * g.cell()).collect())
            .expect("shape matches grid");
        let t = cgemm_real_lhs(&nu, &ev);
        let mut ex = CMat::zeros(nxi, g.nx);
        for a in 0..g.nx {
            ex.fill_exp_col(a, (1.0, 0.0), grid.xi()[0], hxi, g.x(a));
        }
        let c = cgemm(&ex, &t);
        let (kx, kv) = (PI / g.dx() * (1.0 + 1e-12), PI / g.dv() * (1.0 + 1e-12));
        let mut values = vec![C64::new(0.0, 0.0); nxi * neta];
        for j in 0..nxi {
            for q in 0..half {
                if grid.xi()[j].abs() > kx || (q as f64 * heta).abs() > kv {
                    continue;
                }
                let z = C64::new(c.re[[j, q]], c.im[[j, q]]);
                values[j * neta + mid + q] = z;
                values[(nxi - 1 - j) * neta + mid - q] = z.conj();
            }
        }
        SpectralField::from_values(grid, values).expect("sizes match")
    }
}

fn to_complex(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

struct Plans {
    g: PhysicalGrid,
    fft: Fft2,
}

impl Plans {
    fn new(g: PhysicalGrid) -> Self {
        Plans { g, fft: Fft2::new(g.nx, g.nv) }
    }

    fn fft_v(&self, buf: &mut [C64], inverse: bool) {
        self.fft.along_cols(buf, inverse)
    }

    fn fft_x(&self, buf: &mut [C64], inverse: bool) {
        self.fft.along_rows(buf, inverse)
    }

    fn fft_2d(&self, buf: &mut [C64], inverse: bool) {
        self.fft.both(buf, inverse)
    }

    /// Multiply by `exp(sign · i t κ_a v_b)`.
    fn shear_phase(&self, buf: &mut [C64], t: f64, sign: f64) {
        let g = self.g;
        for a in 0..g.nx {
            let k = g.kx(a);
            if k == 0.0 {
                continue;
            }
            for b in 0..g.nv {
                buf[a * g.nv + b] *= C64::from_polar(1.0, sign * t * k * g.v(b));
            }
        }
    }

    /// Multiply the full spectrum by `G(t, κ_a, λ_b − tκ_a)`.
    fn kernel(&self, buf: &mut [C64], t: f64, noise: Noise) {
        if noise == Noise::Off {
            return;
        }
        let g = self.g;
        for a in 0..g.nx {
            let k = g.kx(a);
            for b in 0..g.nv {
                buf[a * g.nv + b] *= noise_multiplier(noise, t, k, g.kv(b) - t * k);
            }
        }
    }
}

fn validate(f: &PhysicalField, t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("time must be finite and ≥ 0, got {t}")));
    }
    if !f.is_finite() {
        return Err(Error::invalid("non-finite field"));
    }
    f.grid.check_shear(t)
}

fn real_part(g: PhysicalGrid, buf: &[C64]) -> PhysicalField {
    let scale = 1.0 / g.len() as f64;
    PhysicalField { grid: g, values: buf.iter().map(|z| z.re * scale).collect() }
}

/// `P_t f` for a function sampled on the grid (backward semigroup).
pub fn apply_pt_function(f: &PhysicalField, t: f64, noise: Noise) -> Result<PhysicalField> {
    validate(f, t)?;
    if t == 0.0 {
        return Ok(f.clone());
    }
    let plans = Plans::new(f.grid);
    let mut buf = to_complex(&f.values);
    plans.fft_x(&mut buf, false);
    plans.shear_phase(&mut buf, t, 1.0);
    plans.fft_v(&mut buf, false);
    plans.kernel(&mut buf, t, noise);
    plans.fft_2d(&mut buf, true);
    Ok(real_part(f.grid, &buf))
}

/// Forward (Fokker–Planck) action `P_t^*` on densities; the exact discrete
/// adjoint of [`apply_pt_function`] with respect to `Σ·cell`.
pub fn apply_pt_density(nu: &PhysicalField, t: f64, noise: Noise) -> Result<PhysicalField> {
    validate(nu, t)?;
    if t == 0.0 {
        return Ok(nu.clone());
    }
    let plans = Plans::new(nu.grid);
    let mut buf = to_complex(&nu.values);
    plans.fft_2d(&mut buf, false);
    plans.kernel(&mut buf, t, noise);
    plans.fft_v(&mut buf, true);
    plans.shear_phase(&mut buf, t, -1.0);
    plans.fft_x(&mut buf, true);
    Ok(real_part(nu.grid, &buf))
}

fn require_positive(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::invalid(format!("gradient needs t > 0, got {t}")));
    }
    Ok(())
}

/// `∇_v P_t f`: [`apply_pt_function`] followed by spectral differentiation.
pub fn grad_v_pt_function(f: &PhysicalField, t: f64, noise: Noise) -> Result<PhysicalField> {
    require_positive(t)?;
    Ok(apply_pt_function(f, t, noise)?.dv_spectral())
}

/// `∇_v P_t f` through the direct sheared multiplier
/// `i(η' + tξ) G(t, ξ, η') f̂(ξ, η')`, an independent second path.
pub fn grad_v_pt_function_sheared(f: &PhysicalField, t: f64, noise: Noise) -> Result<PhysicalField> {
    require_positive(t)?;
    validate(f, t)?;
    let g = f.grid;
    let plans = Plans::new(g);
    let mut buf = to_complex(&f.values);
    plans.fft_2d(&mut buf, false);
    for a in 0..g.nx {
        let k = g.kx(a);
        for b in 0..g.nv {
            let eta = if b == g.nv / 2 { 0.0 } else { g.kv(b) };
            let m = noise_multiplier(noise, t, k, eta);
            buf[a * g.nv + b] *= C64::new(0.0, (eta + t * k) * m);
        }
    }
    plans.fft_v(&mut buf, true);
    plans.shear_phase(&mut buf, t, 1.0);
    plans.fft_x(&mut buf, true);
    Ok(real_part(g, &buf))
}
