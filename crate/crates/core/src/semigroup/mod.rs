//! The free kinetic semigroup
//! `P_t f(x,v) = E f(x + tv + X_t, v + V_t)` with `(X_t, V_t) = (√2∫₀ᵗB, √2 B_t)`,
//! its Gaussian density, its Fourier multiplier and property probes.

mod measure;
mod physical;

pub use measure::{apply_pt_measure, CharSource, DiscreteAtoms};
pub use physical::{apply_pt_density, apply_pt_function, grad_v_pt_function, grad_v_pt_function_sheared, PhysicalField, PhysicalGrid};

use crate::error::{Error, Result};
use crate::spectral::{FrequencyGrid, KineticPoint, SobolevOrder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Noise switch: `Kinetic` is `σ = √2`, `Off` is `σ = 0` (free transport /
/// Vlasov mode).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Noise {
    Off,
    #[default]
    Kinetic,
}

impl Noise {
    /// The diffusion coefficient σ.
    pub fn sigma(self) -> f64 {
        match self {
            Noise::Off => 0.0,
            Noise::Kinetic => std::f64::consts::SQRT_2,
        }
    }
}

/// Characteristic function of the kinetic Gaussian increment,
/// `exp(−t³|ξ|²/3 − t²ξη − t|η|²) = exp(−∫₀ᵗ |η + rξ|² dr)`.
#[inline]
pub fn kernel_g(t: f64, xi: f64, eta: f64) -> f64 {
    (-(t * t * t / 3.0) * xi * xi - t * t * xi * eta - t * eta * eta).exp()
}

/// [`kernel_g`] for arbitrary dimension.
pub fn kernel_g_nd(t: f64, xi: &[f64], eta: &[f64]) -> f64 {
    let xi2: f64 = xi.iter().map(|a| a * a).sum();
    let eta2: f64 = eta.iter().map(|a| a * a).sum();
    let dot: f64 = xi.iter().zip(eta).map(|(a, b)| a * b).sum();
    (-(t * t * t / 3.0) * xi2 - t * t * dot - t * eta2).exp()
}

/// The multiplier for the chosen noise: [`kernel_g`] or `1` without noise.
#[inline]
pub fn noise_multiplier(noise: Noise, t: f64, xi: f64, eta: f64) -> f64 {
    match noise {
        Noise::Kinetic => kernel_g(t, xi, eta),
        Noise::Off => 1.0,
    }
}

/// Law of `(X_t, V_t)`: centered Gaussian with `Var X = 2t³/3`,
/// `Cov(X, V) = t²`, `Var V = 2t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KineticGaussian {
    t: f64,
}

impl KineticGaussian {
    pub fn new(t: f64) -> Result<Self> {
        if !(t.is_finite() && t > 0.0) {
            return Err(Error::invalid(format!("kinetic Gaussian needs t > 0, got {t}")));
        }
        Ok(KineticGaussian { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn var_x(&self) -> f64 {
        2.0 * self.t.powi(3) / 3.0
    }

    pub fn cov_xv(&self) -> f64 {
        self.t * self.t
    }

    pub fn var_v(&self) -> f64 {
        2.0 * self.t
    }

    /// Determinant of the 2×2 covariance, `t⁴/3`.
    pub fn det(&self) -> f64 {
        self.var_x() * self.var_v() - self.cov_xv().powi(2)
    }

    /// Draw `(X_t, V_t)` exactly.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let v = self.var_v().sqrt() * z1;
        let x = self.cov_xv() / self.var_v() * v + (self.t.powi(3) / 6.0).sqrt() * z2;
        (x, v)
    }

    /// Density of `(X_t, V_t)`.
    pub fn density(&self, x: f64, v: f64) -> f64 {
        let t = self.t;
        let q = (3.0 * x * x + (3.0 * x - 2.0 * t * v).powi(2)) / (4.0 * t * t * t);
        (-q).exp() / (2.0 * PI * self.det().sqrt())
    }
}

/// Density `p_t(x, v)` of the kinetic Gaussian increment (`d = 1`).
pub fn density_pt(t: f64, x: f64, v: f64) -> Result<f64> {
    Ok(KineticGaussian::new(t)?.density(x, v))
}

/// Monte Carlo evaluation of `P_t f(p)` with exact Gaussian draws; returns
/// `(estimate, standard error)`.
pub fn semigroup_mc_oracle(f: &dyn Fn(f64, f64) -> f64, p: KineticPoint, t: f64, n: usize, seed: u64, noise: Noise) -> Result<(f64, f64)> {
    if n < 100 {
        return Err(Error::invalid(format!("Monte Carlo oracle needs n ≥ 100, got {n}")));
    }
    if !(t.is_finite() && t >= 0.0) || !p.is_finite() {
        return Err(Error::invalid("oracle needs finite p and t ≥ 0"));
    }
    let (x0, v0) = (p.x + t * p.v, p.v);
    if t == 0.0 || noise == Noise::Off {
        return Ok((f(x0, v0), 0.0));
    }
    let g = KineticGaussian::new(t)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..n {
        let (x, v) = g.sample(&mut rng);
        let y = f(x0 + x, v0 + v);
        let delta = y - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = m2 / (n - 1) as f64;
    Ok((mean, (var / n as f64).sqrt()))
}

/// Both sides of the time-regularity inequality
/// `|G(t−r, ξ, η) − G(u−r, ξ, η)| ≤ ¼|η|²(t−u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegularityProbe {
    pub lhs: f64,
    pub rhs: f64,
}

impl RegularityProbe {
    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs
    }
}

/// Evaluates the time-regularity inequality of the kernel at `0 ≤ r ≤ u ≤ t`.
pub fn kernel_time_regularity_check(r: f64, u: f64, t: f64, xi: f64, eta: f64) -> Result<RegularityProbe> {
    if !(0.0 <= r && r <= u && u <= t) || !(xi.is_finite() && eta.is_finite() && t.is_finite()) {
        return Err(Error::invalid(format!("need 0 ≤ r ≤ u ≤ t, got r={r}, u={u}, t={t}")));
    }
    let lhs = (kernel_g(t - r, xi, eta) - kernel_g(u - r, xi, eta)).abs();
    let rhs = 0.25 * eta * eta * (t - u);
    Ok(RegularityProbe { lhs, rhs })
}

/// Grid quadrature of `∫ w_{−s}(ξ,η)(|η|² + |η|⁴) dξ dη`, finite for
/// `s > 2d + 2` (velocity moments of the dual weight).
pub fn velocity_moment_integral(grid: &FrequencyGrid, order: SobolevOrder) -> Result<f64> {
    if order.d != 1 {
        return Err(Error::invalid("grid quadrature is one-dimensional per block"));
    }
    let w = grid.sobolev_weights(-order.s);
    let ne = grid.n_eta();
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        let eta = grid.eta()[i % ne];
        acc += wi * (eta * eta + eta.powi(4));
    }
    Ok(acc)
}
