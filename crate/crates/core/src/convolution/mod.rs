//! The stochastic convolution
//! `z^N_t(f) = (σ/N) Σ_i ∫₀ᵗ ∇_v(P_{t−r} f)(x^i_r, v^i_r) dB^i_r`
//! evaluated from stored particle paths, its negative-Sobolev size, and the
//! empirical mild identity satisfied by the particle system.

mod residual;
mod sheared;

pub use residual::{mild_identity_residual, z_direct, MildIdentityTerms};
pub use sheared::{z_dual_norm_profile, z_sheared_fields, z_sup_dual_norm, ShearedZ};

use crate::error::{Error, Result};
use crate::linalg::{cgemm, CMat};
use crate::particles::{step, EnsemblePath, InteractionKernel};
use crate::semigroup::{noise_multiplier, Noise};
use crate::spectral::{pairing, FrequencyGrid, KineticPoint, SpectralField};
use crate::C64;
use rayon::prelude::*;
use std::io::Write;
use std::sync::Arc;

/// Integrand data of the stochastic convolution: the particle states at
/// every step up to the last snapshot together with the velocity
/// increments that drove them.
#[derive(Clone, Debug)]
pub struct ZAccumulator {
    grid: Arc<FrequencyGrid>,
    dt: f64,
    n: usize,
    seed: u64,
    noise: Noise,
    kernel: InteractionKernel,
    /// `states[m]` is the state at step `m`, for `m = 0..=last snapshot`.
    states: Vec<Vec<KineticPoint>>,
    /// `db[m]` is the increment over `[t_m, t_{m+1}]`.
    db: Vec<Vec<f64>>,
    snapshots: Vec<usize>,
}

impl ZAccumulator {
    /// Collects the data of `path` needed for the snapshot steps (strictly
    /// increasing, within `0..=M`). States that the path did not keep are
    /// regenerated from the stored increments.
    pub fn new(path: &EnsemblePath, grid: Arc<FrequencyGrid>, snapshot_steps: Vec<usize>) -> Result<Self> {
        if snapshot_steps.is_empty() || snapshot_steps.windows(2).any(|w| w[1] <= w[0]) || *snapshot_steps.last().unwrap() > path.n_steps()
        {
            return Err(Error::invalid("snapshot steps must be non-empty, increasing and within 0..=M"));
        }
        let last = *snapshot_steps.last().unwrap();
        let cfg = path.config();
        let inc = path.increments();
        let mut states = Vec::with_capacity(last + 1);
        let first = path.state_at_step(0).ok_or_else(|| Error::invalid("the path must keep its initial state"))?;
        states.push(first.to_vec());
        for m in 0..last {
            let next = match path.state_at_step(m + 1) {
                Some(s) => s.to_vec(),
                None => step(&states[m], cfg.dt, inc.db(m), inc.di(m), &cfg.kernel, cfg.noise)?,
            };
            states.push(next);
        }
        let db = (0..last).map(|m| inc.db(m).to_vec()).collect();
        Ok(ZAccumulator {
            grid,
            dt: path.dt(),
            n: path.n(),
            seed: path.seed(),
            noise: cfg.noise,
            kernel: cfg.kernel.clone(),
            states,
            db,
            snapshots: snapshot_steps,
        })
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn noise(&self) -> Noise {
        self.noise
    }

    pub fn kernel(&self) -> &InteractionKernel {
        &self.kernel
    }

    pub fn snapshots(&self) -> &[usize] {
        &self.snapshots
    }

    /// State at step `m` (up to the last snapshot).
    pub fn state(&self, m: usize) -> Option<&[KineticPoint]> {
        self.states.get(m).map(Vec::as_slice)
    }

    /// Velocity increments over step `m`.
    pub fn increment(&self, m: usize) -> Option<&[f64]> {
        self.db.get(m).map(Vec::as_slice)
    }

    /// The same paths with all increments multiplied by `c` (states kept).
    pub fn with_scaled_increments(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.db.iter_mut().flatten().for_each(|d| *d *= c);
        out
    }

    fn require_snapshot(&self, step: usize) -> Result<()> {
        if self.snapshots.binary_search(&step).is_err() {
            return Err(Error::invalid(format!("step {step} is not a recorded snapshot")));
        }
        Ok(())
    }

    /// `i σ / N` — the prefactor of every transform.
    fn prefactor(&self) -> C64 {
        C64::new(0.0, self.noise.sigma() / self.n as f64)
    }

    /// Whether this accumulator was built from `path`.
    pub fn matches(&self, path: &EnsemblePath) -> bool {
        self.seed == path.seed()
            && self.n == path.n()
            && self.dt == path.dt()
            && self.states.len() <= path.n_steps() + 1
            && path.state_at_step(0).is_some_and(|s| s == self.states[0].as_slice())
    }
}

/// The distributional transform `Ẑ_t` of the stochastic convolution on a
/// frequency grid, normalised so that
/// `z_t(f) = (2π)^{-2} ∫ conj(f̂) Ẑ_t dξ dη` with `f̂ = ∫ e^{i(ξx+ηv)} f`.
#[derive(Clone, Debug)]
pub struct ZField {
    pub t: f64,
    pub step: usize,
    pub values: SpectralField,
}

impl ZField {
    /// `z_t(f)` for a real test function with transform `f̂`.
    pub fn pair(&self, f_hat: &SpectralField) -> Result<f64> {
        Ok(pairing(&self.values, f_hat)?.re)
    }

    /// Writes `t,xi,eta,re,im` rows.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,xi,eta,re,im")?;
        let g = self.values.grid();
        for (j, &xi) in g.xi().iter().enumerate() {
            for (k, &eta) in g.eta().iter().enumerate() {
                let z = self.values.at(j, k);
                writeln!(w, "{:.17e},{xi:.17e},{eta:.17e},{:.17e},{:.17e}", self.t, z.re, z.im)?;
            }
        }
        Ok(())
    }
}

/// `Ẑ_t(ξ,η) = (iσ/N) Σ_i Σ_{t_m<t} e^{i[ξ(x^i_m+(t−t_m)v^i_m) + η v^i_m]}
/// (η + (t−t_m)ξ) G(t−t_m, ξ, η) ΔB^i_m` on the accumulator's grid, by
/// direct summation (one complex GEMM per step).
pub fn z_field_at(acc: &ZAccumulator, step: usize) -> Result<ZField> {
    acc.require_snapshot(step)?;
    let g = &acc.grid;
    let (nxi, neta) = (g.n_xi(), g.n_eta());
    let (hxi, heta) = g.spacing();
    let t = step as f64 * acc.dt;
    let total = (0..step)
        .into_par_iter()
        .fold(
            || vec![C64::new(0.0, 0.0); nxi * neta],
            |mut sum, m| {
                let tau = t - m as f64 * acc.dt;
                let (state, db) = (&acc.states[m], &acc.db[m]);
                let mut ex = CMat::zeros(nxi, state.len());
                let mut ev = CMat::zeros(state.len(), neta);
                for (i, p) in state.iter().enumerate() {
                    ex.fill_exp_col(i, (db[i], 0.0), g.xi()[0], hxi, p.x + tau * p.v);
                    ev.fill_exp_row(i, (1.0, 0.0), g.eta()[0], heta, p.v);
                }
                let prod = cgemm(&ex, &ev);
                for (j, &xi) in g.xi().iter().enumerate() {
                    for (k, &eta) in g.eta().iter().enumerate() {
                        let f = (eta + tau * xi) * noise_multiplier(acc.noise, tau, xi, eta);
                        sum[j * neta + k] += C64::new(prod.re[[j, k]], prod.im[[j, k]]) * f;
                    }
                }
                sum
            },
        )
        .reduce(
            || vec![C64::new(0.0, 0.0); nxi * neta],
            |mut a, b| {
                a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
                a
            },
        );
    let pre = acc.prefactor();
    let values = SpectralField::from_values(g, total.into_iter().map(|z| z * pre).collect())?;
    Ok(ZField { t, step, values })
}

/// `Ẑ_t` at arbitrary frequencies by plain summation (reference evaluator).
pub fn z_at_points(acc: &ZAccumulator, step: usize, points: &[(f64, f64)]) -> Result<Vec<C64>> {
    acc.require_snapshot(step)?;
    let t = step as f64 * acc.dt;
    let pre = acc.prefactor();
    Ok(points
        .par_iter()
        .map(|&(xi, eta)| {
            let mut s = C64::new(0.0, 0.0);
            for m in 0..step {
                let tau = t - m as f64 * acc.dt;
                let f = (eta + tau * xi) * noise_multiplier(acc.noise, tau, xi, eta);
                for (p, &d) in acc.states[m].iter().zip(&acc.db[m]) {
                    s += C64::from_polar(d * f, xi * (p.x + tau * p.v) + eta * p.v);
                }
            }
            s * pre
        })
        .collect())
}
