//! All-snapshot evaluation of `Ẑ_t` in sheared coordinates.
//!
//! With `c = η + tξ` the kernel factorises over steps,
//! `G(t−t_m, ξ, c−tξ) = Π_{l≥m} D_l(ξ,c)` with
//! `D_l = exp(−∫_{t_l}^{t_{l+1}} |c−sξ|² ds)`, so
//! `Y_{m+1} = D_m ⊙ (Y_m + A_m)` with
//! `A_m(ξ,c) = (c−t_mξ) Σ_i e^{iξ(x_m−t_m v_m) + i c v_m} ΔB_m`
//! yields `Ẑ_{t_m}(ξ, c − t_mξ) = (iσ/N) Y_m(ξ,c)` for every `m` in one pass.

use super::ZAccumulator;
use crate::error::Result;
use crate::linalg::{cgemm, CMat};
use crate::semigroup::noise_multiplier;
use crate::spectral::quadrature::{cusp_product_weights, trapezoid_weights};
use crate::spectral::{sobolev_weight_1d, SobolevOrder};
use crate::C64;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// `Ẑ_t` on the sheared lattice `(ξ_j, c_k)`, i.e. at `(ξ_j, c_k − tξ_j)`.
#[derive(Clone, Debug)]
pub struct ShearedZ {
    pub t: f64,
    pub step: usize,
    pub xi: Vec<f64>,
    pub c: Vec<f64>,
    /// `ξ`-major values of `Ẑ_t(ξ_j, c_k − tξ_j)`.
    pub values: Vec<C64>,
}

impl ShearedZ {
    pub fn at(&self, j: usize, k: usize) -> C64 {
        self.values[j * self.c.len() + k]
    }

    /// The `η` coordinate of lattice node `(j,k)`.
    pub fn eta(&self, j: usize, k: usize) -> f64 {
        self.c[k] - self.t * self.xi[j]
    }

    /// `(2π)^{-2} (∫∫ w_{−s}(ξ, c−tξ) |Ẑ_t|² dξ dc)^{1/2}` over the lattice
    /// (the shear has unit Jacobian), with product integration in `ξ` for
    /// the cusp of the weight.
    pub fn dual_norm(&self, order: SobolevOrder) -> Result<f64> {
        order.require_dual()?;
        let w = lattice_weights(&self.xi, &self.c, self.t, order.s);
        let acc: f64 = w.iter().zip(&self.values).map(|(w, z)| w * z.norm_sqr()).sum();
        Ok(acc.max(0.0).sqrt() / (2.0 * PI).powi(2))
    }
}

type WeightKey = (u64, u64, usize, u64, u64, usize, u64, u64);

/// Quadrature weights of `w_{−s}(ξ, c−tξ)` on the lattice, memoised because
/// every replica of a study shares the lattice and the snapshot times.
fn lattice_weights(xi: &[f64], c: &[f64], t: f64, s: f64) -> Arc<Vec<f64>> {
    static CACHE: OnceLock<Mutex<HashMap<WeightKey, Arc<Vec<f64>>>>> = OnceLock::new();
    let key = (xi[0].to_bits(), xi[1].to_bits(), xi.len(), c[0].to_bits(), c[1].to_bits(), c.len(), t.to_bits(), s.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(w) = cache.lock().unwrap().get(&key) {
        return w.clone();
    }
    let (nxi, nc) = (xi.len(), c.len());
    let tc = trapezoid_weights(c[1] - c[0], nc);
    let mut w = vec![0.0; nxi * nc];
    for k in 0..nc {
        let ck = c[k];
        let line = cusp_product_weights(xi[0], xi[1] - xi[0], nxi, |x| sobolev_weight_1d(x, ck - t * x, -s));
        for j in 0..nxi {
            w[j * nc + k] = tc[k] * line[j];
        }
    }
    let w = Arc::new(w);
    cache.lock().unwrap().insert(key, w.clone());
    w
}

/// The lattice used for the dual norm: the `ξ` nodes of the accumulator's
/// grid and `c` nodes with the grid's `η` spacing extended to cover
/// `|c| ≤ H + T Ξ`, so that the sheared region contains the `(ξ,η)` box at
/// every snapshot time.
fn lattice(acc: &ZAccumulator) -> (Vec<f64>, Vec<f64>) {
    let g = acc.grid();
    let (xi_max, eta_max) = g.cutoffs();
    let (_, h) = g.spacing();
    let t_last = *acc.snapshots().last().unwrap() as f64 * acc.dt();
    let half = ((eta_max + t_last * xi_max) / h - 1e-9).ceil() as usize;
    let c = (0..=2 * half).map(|k| (k as f64 - half as f64) * h).collect();
    (g.xi().to_vec(), c)
}

/// `Ẑ_t` on the sheared lattice at every snapshot, by the step recursion.
pub fn z_sheared_fields(acc: &ZAccumulator) -> Result<Vec<ShearedZ>> {
    let (xi, c) = lattice(acc);
    let (nxi, nc) = (xi.len(), c.len());
    let (hxi, hc) = (xi[1] - xi[0], c[1] - c[0]);
    let dt = acc.dt();
    let pre = C64::new(0.0, acc.noise().sigma() / acc.n() as f64);
    let last = *acc.snapshots().last().unwrap();
    let mut y = vec![C64::new(0.0, 0.0); nxi * nc];
    let mut out = Vec::with_capacity(acc.snapshots().len());
    let emit = |m: usize, y: &[C64], out: &mut Vec<ShearedZ>| {
        if acc.snapshots().binary_search(&m).is_ok() {
            let values = y.iter().map(|z| z * pre).collect();
            out.push(ShearedZ { t: m as f64 * dt, step: m, xi: xi.clone(), c: c.clone(), values });
        }
    };
    emit(0, &y, &mut out);
    for m in 0..last {
        let tm = m as f64 * dt;
        let state = acc.state(m).expect("state kept");
        let db = acc.increment(m).expect("increment kept");
        let mut ex = CMat::zeros(nxi, state.len());
        let mut ec = CMat::zeros(state.len(), nc);
        for (i, p) in state.iter().enumerate() {
            ex.fill_exp_col(i, (db[i], 0.0), xi[0], hxi, p.x - tm * p.v);
            ec.fill_exp_row(i, (1.0, 0.0), c[0], hc, p.v);
        }
        let a = cgemm(&ex, &ec);
        for j in 0..nxi {
            for k in 0..nc {
                let shifted = c[k] - tm * xi[j];
                let d = noise_multiplier(acc.noise(), dt, -xi[j], shifted);
                let q = j * nc + k;
                y[q] = (y[q] + C64::new(a.re[[j, k]], a.im[[j, k]]) * shifted) * d;
            }
        }
        emit(m + 1, &y, &mut out);
    }
    Ok(out)
}

/// `(t, ‖Ẑ_t‖_{−s})` at every snapshot.
pub fn z_dual_norm_profile(acc: &ZAccumulator, order: SobolevOrder) -> Result<Vec<(f64, f64)>> {
    z_sheared_fields(acc)?.iter().map(|z| Ok((z.t, z.dual_norm(order)?))).collect()
}

/// Maximum over the snapshots of `‖z_t‖_{−s}` — the computable surrogate
/// for the supremum over `[0, T]`.
pub fn z_sup_dual_norm(acc: &ZAccumulator, order: SobolevOrder) -> Result<f64> {
    Ok(z_dual_norm_profile(acc, order)?.into_iter().map(|(_, v)| v).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::super::tests::path;
    use super::super::{z_at_points, z_field_at};
    use super::*;
    use crate::semigroup::Noise;
    use crate::spectral::{dual_norm, FrequencyGrid};

    #[test]
    fn recursion_matches_direct_summation() {
        let p = path(10, 0.05, 0.5, Noise::Kinetic, true);
        let acc = ZAccumulator::new(&p, FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap(), vec![3, 10]).unwrap();
        for z in z_sheared_fields(&acc).unwrap() {
            let pts: Vec<(usize, usize)> =
                (0..z.xi.len()).step_by(3).flat_map(|j| (0..z.c.len()).step_by(4).map(move |k| (j, k))).collect();
            let freq: Vec<(f64, f64)> = pts.iter().map(|&(j, k)| (z.xi[j], z.eta(j, k))).collect();
            let plain = z_at_points(&acc, z.step, &freq).unwrap();
            for (q, &(j, k)) in pts.iter().enumerate() {
                assert!((z.at(j, k) - plain[q]).norm() < 1e-11 * (1.0 + plain[q].norm()), "t={} node {j},{k}", z.t);
            }
        }
    }

    #[test]
    fn sheared_norm_agrees_with_grid_norm() {
        // Far out in frequency the weight kills everything, so the two
        // truncation regions give the same norm.
        let p = path(20, 0.05, 0.5, Noise::Kinetic, true);
        let g = FrequencyGrid::new(24.0, 24.0, 193, 193).unwrap();
        let acc = ZAccumulator::new(&p, g, vec![10]).unwrap();
        let o = SobolevOrder::new(6.0, 1).unwrap();
        let sheared = z_sup_dual_norm(&acc, o).unwrap();
        let direct = dual_norm(&z_field_at(&acc, 10).unwrap().values, o).unwrap();
        assert!((sheared - direct).abs() < 1e-3 * direct, "{sheared} vs {direct}");
    }

    #[test]
    fn zero_increments_give_zero_norm() {
        let p = path(10, 0.05, 0.5, Noise::Off, true);
        let acc = ZAccumulator::new(&p, FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap(), vec![5, 10]).unwrap();
        assert_eq!(z_sup_dual_norm(&acc, SobolevOrder::new(6.0, 1).unwrap()).unwrap(), 0.0);
    }
}
