//! Kinetic geometry, the anisotropic Sobolev weight, frequency grids and
//! (dual) Sobolev norms of grid functions and measures.

mod grid;
mod norms;
pub mod quadrature;

pub(crate) use grid::grid_uniform_char;
pub use grid::{measure_char, FrequencyGrid, SpectralField};
pub use norms::{
    dual_norm, dual_norm_checked, grid_fn_norm, pairing, sobolev_weight_integral, spacing_error_estimate, tail_bound,
    tail_norm_certificate, DualNormEstimate,
};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// A phase-space point `(x, v)` in `R × R`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticPoint {
    pub x: f64,
    pub v: f64,
}

impl KineticPoint {
    pub fn new(x: f64, v: f64) -> Self {
        KineticPoint { x, v }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.v.is_finite()
    }
}

/// Regularity order `s` in space dimension `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SobolevOrder {
    pub s: f64,
    pub d: usize,
}

impl SobolevOrder {
    pub fn new(s: f64, d: usize) -> Result<Self> {
        if !s.is_finite() || d == 0 {
            return Err(Error::invalid(format!("bad Sobolev order s={s}, d={d}")));
        }
        Ok(SobolevOrder { s, d })
    }

    /// Checks `s > 2d`, needed for the dual norm of measures to be finite.
    pub fn require_dual(&self) -> Result<()> {
        if self.s > 2.0 * self.d as f64 {
            Ok(())
        } else {
            Err(Error::invalid(format!("dual norm needs s > 2d (got s={}, d={})", self.s, self.d)))
        }
    }

    /// Checks `s > 2d + 3`, the regime of the mean-field convergence rate.
    pub fn require_lln(&self) -> Result<()> {
        if self.s > 2.0 * self.d as f64 + 3.0 {
            Ok(())
        } else {
            Err(Error::invalid(format!("the convergence study needs s > 2d + 3 (got s={}, d={})", self.s, self.d)))
        }
    }
}

/// Anisotropic kinetic distance `|x_p − x_q|^{1/3} + |v_p − v_q|`.
pub fn kinetic_distance(p: KineticPoint, q: KineticPoint) -> Result<f64> {
    kinetic_distance_nd(&[p.x], &[p.v], &[q.x], &[q.v])
}

/// Kinetic distance for points of arbitrary dimension, Euclidean per block.
pub fn kinetic_distance_nd(xp: &[f64], vp: &[f64], xq: &[f64], vq: &[f64]) -> Result<f64> {
    if xp.len() != xq.len() || vp.len() != vq.len() || xp.len() != vp.len() {
        return Err(Error::Mismatch("points of different dimension".into()));
    }
    if xp.iter().chain(vp).chain(xq).chain(vq).any(|c| !c.is_finite()) {
        return Err(Error::invalid("non-finite phase-space point"));
    }
    let dx = xp.iter().zip(xq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let dv = vp.iter().zip(vq).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    Ok(dx.cbrt() + dv)
}

/// The Fourier weight `(1 + |ξ|^{2/3} + |η|²)^s` for arbitrary dimension.
pub fn sobolev_weight(xi: &[f64], eta: &[f64], s: f64) -> f64 {
    let xi2: f64 = xi.iter().map(|a| a * a).sum();
    let eta2: f64 = eta.iter().map(|a| a * a).sum();
    (1.0 + xi2.cbrt() + eta2).powf(s)
}

/// One-dimensional fast path of [`sobolev_weight`].
#[inline]
pub fn sobolev_weight_1d(xi: f64, eta: f64, s: f64) -> f64 {
    (1.0 + (xi * xi).cbrt() + eta * eta).powf(s)
}
