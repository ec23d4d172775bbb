use super::grid::{FrequencyGrid, SpectralField};
use super::SobolevOrder;
use crate::error::{Error, Result};
use crate::C64;
use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;
use std::f64::consts::PI;
use std::sync::Arc;

fn require_grid_dimension(order: SobolevOrder) -> Result<()> {
    if order.d != 1 {
        return Err(Error::invalid(format!("frequency grids are one-dimensional per block; got d={}", order.d)));
    }
    Ok(())
}

fn weighted_square_sum(field: &SpectralField, weights: &[f64]) -> f64 {
    field.values().iter().zip(weights).map(|(z, w)| w * z.norm_sqr()).sum()
}

/// Dual Sobolev norm `(2π)^{-2}(∫ w_{-s} |μ̂|²)^{1/2}` of a (signed) measure
/// given by its characteristic function.
pub fn dual_norm(mu_hat: &SpectralField, order: SobolevOrder) -> Result<f64> {
    order.require_dual()?;
    require_grid_dimension(order)?;
    let w = mu_hat.grid().sobolev_weights(-order.s);
    Ok(weighted_square_sum(mu_hat, &w).sqrt() / (4.0 * PI * PI))
}

/// A dual norm together with its truncation certificate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualNormEstimate {
    /// The grid value of the dual norm.
    pub value: f64,
    /// Upper bound on the norm contribution lost outside the frequency box,
    /// valid whenever `|μ̂| ≤ 1` (probability measures).
    pub tail_certificate: f64,
    /// Whether the certificate is below the requested tolerance.
    pub within_tolerance: bool,
}

/// [`dual_norm`] with the analytic truncation certificate attached; the
/// result is flagged (not rejected) when the grid is too small for
/// `tail_tolerance`.
pub fn dual_norm_checked(mu_hat: &SpectralField, order: SobolevOrder, tail_tolerance: f64) -> Result<DualNormEstimate> {
    let value = dual_norm(mu_hat, order)?;
    let tail_certificate = tail_norm_certificate(order, mu_hat.grid().cutoffs())?;
    Ok(DualNormEstimate { value, tail_certificate, within_tolerance: tail_certificate <= tail_tolerance })
}

/// Kinetic Sobolev norm `(∫ w_s |f̂|²)^{1/2}` of a grid function given by
/// its transform (no `(2π)` factor).
pub fn grid_fn_norm(f_hat: &SpectralField, order: SobolevOrder) -> Result<f64> {
    require_grid_dimension(order)?;
    let w = f_hat.grid().sobolev_weights(order.s);
    Ok(weighted_square_sum(f_hat, &w).sqrt())
}

/// Duality pairing `⟨μ, f⟩ = (2π)^{-2} ∫ conj(f̂) μ̂` with both transforms in
/// the `+i` convention; real for real `f` and real `μ`.
pub fn pairing(mu_hat: &SpectralField, f_hat: &SpectralField) -> Result<C64> {
    let (g1, g2): (&Arc<FrequencyGrid>, &Arc<FrequencyGrid>) = (mu_hat.grid(), f_hat.grid());
    if !(Arc::ptr_eq(g1, g2) || g1.same_nodes(g2)) {
        return Err(Error::Mismatch("pairing of fields on different grids".into()));
    }
    let w = g1.lebesgue_weights();
    let mut acc = C64::new(0.0, 0.0);
    for ((m, f), w) in mu_hat.values().iter().zip(f_hat.values()).zip(&w) {
        acc += f.conj() * m * *w;
    }
    Ok(acc / (4.0 * PI * PI))
}

fn sphere_area(d: usize) -> f64 {
    let h = d as f64 / 2.0;
    2.0 * PI.powf(h) / gamma(h)
}

/// `∫_{R^d×R^d} (1 + |ξ|^{2/3} + |η|²)^{-s} dξ dη` in closed form
/// (finite for `s > 2d`).
pub fn sobolev_weight_integral(order: SobolevOrder) -> Result<f64> {
    order.require_dual()?;
    let (d, s) = (order.d as f64, order.s);
    let w = sphere_area(order.d);
    Ok(0.5 * w * beta(d / 2.0, s - d / 2.0) * 1.5 * w * beta(1.5 * d, s - 2.0 * d))
}

/// Analytic upper bound on `(2π)^{-2d} ∫_{outside box} w_{-s}` for the box
/// `|ξ| ≤ Ξ`, `|η| ≤ H`: the region outside is covered by `{|ξ| > Ξ}` and
/// `{|η| > H}`, and each piece reduces to an incomplete Beta integral in
/// polar coordinates.
pub fn tail_bound(order: SobolevOrder, cutoffs: (f64, f64)) -> Result<f64> {
    order.require_dual()?;
    let (xi_max, eta_max) = cutoffs;
    if !(xi_max >= 0.0 && eta_max >= 0.0) {
        return Err(Error::invalid("cutoffs must be nonnegative"));
    }
    let (d, s) = (order.d as f64, order.s);
    let w = sphere_area(order.d);
    // |ξ| > Ξ, all η.
    let term_a = if xi_max.is_infinite() {
        0.0
    } else {
        let u = xi_max.powf(2.0 / 3.0);
        let (a, b) = (1.5 * d, s - 2.0 * d);
        let upper = beta(a, b) * beta_reg(b, a, 1.0 / (1.0 + u));
        0.5 * w * beta(d / 2.0, s - d / 2.0) * 1.5 * w * upper
    };
    // |η| > H, all ξ.
    let term_b = if eta_max.is_infinite() {
        0.0
    } else {
        let u = eta_max * eta_max;
        let (a, b) = (d / 2.0, s - 2.0 * d);
        let upper = beta(a, b) * beta_reg(b, a, 1.0 / (1.0 + u));
        1.5 * w * beta(1.5 * d, s - 1.5 * d) * 0.5 * w * upper
    };
    Ok((term_a + term_b) / (2.0 * PI).powi(2 * order.d as i32))
}

/// Bound on the dual-norm contribution lost by truncating to the box, for
/// any field with `|μ̂| ≤ 1`: `((2π)^{-2d} · tail_bound)^{1/2}`.
pub fn tail_norm_certificate(order: SobolevOrder, cutoffs: (f64, f64)) -> Result<f64> {
    let t = tail_bound(order, cutoffs)?;
    Ok((t / (2.0 * PI).powi(2 * order.d as i32)).sqrt())
}

/// Estimate of the dual-norm change caused by the node spacing for a
/// probability measure with `E|x−x'|⁴ ≤ dx4` and `E|v−v'|² ≤ dv2` (for
/// independent copies): the cubic interpolation error in `ξ` and the
/// trapezoid error in `η` of `|μ̂|²`, integrated against the weight. The
/// returned value bounds the change of the norm itself.
pub fn spacing_error_estimate(grid: &FrequencyGrid, order: SobolevOrder, dx4: f64, dv2: f64) -> Result<f64> {
    let (hx, he) = grid.spacing();
    let mass = sobolev_weight_integral(order)?;
    let sq = mass * (hx.powi(4) / 24.0 * dx4 + he * he / 12.0 * dv2) / (2.0 * PI).powi(4);
    Ok(sq.sqrt())
}

#[cfg(test)]
mod tests {
    use super::super::{measure_char, KineticPoint};
    use super::*;

    fn order6() -> SobolevOrder {
        SobolevOrder::new(6.0, 1).unwrap()
    }

    #[test]
    fn zero_fields_have_zero_norms() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        let z = SpectralField::zeros(&g);
        assert_eq!(dual_norm(&z, order6()).unwrap(), 0.0);
        assert_eq!(grid_fn_norm(&z, order6()).unwrap(), 0.0);
    }

    #[test]
    fn single_node_grid_function() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        let mut f = SpectralField::zeros(&g);
        let idx = g.index(9, 8);
        f.values_mut()[idx] = C64::new(0.0, 3.0);
        let w = g.sobolev_weights(6.0)[idx];
        assert!((grid_fn_norm(&f, order6()).unwrap() - 3.0 * w.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn dual_norm_requires_large_enough_order() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        let z = SpectralField::zeros(&g);
        assert!(dual_norm(&z, SobolevOrder::new(2.0, 1).unwrap()).is_err());
        assert!(tail_bound(SobolevOrder::new(1.5, 1).unwrap(), (1.0, 1.0)).is_err());
    }

    #[test]
    fn weight_integral_matches_known_value() {
        // (1/2)B(1/2, 11/2) · 2·(3/2)B(3/2, 4) for d=1, s=6.
        let v = sobolev_weight_integral(order6()).unwrap();
        let want = 0.5 * beta(0.5, 5.5) * 2.0 * 1.5 * beta(1.5, 4.0) * 2.0;
        assert!((v - want).abs() < 1e-14);
        assert!((v - 0.2356).abs() < 1e-3);
    }

    #[test]
    fn tail_bound_is_monotone_and_vanishes() {
        let o = order6();
        let a = tail_bound(o, (32.0, 32.0)).unwrap();
        let b = tail_bound(o, (32.0, 64.0)).unwrap();
        assert!(b < a);
        let c = tail_bound(o, (1e12, 1e12)).unwrap();
        assert!(c < 1e-20);
        let full = tail_bound(o, (0.0, 0.0)).unwrap();
        // Both halves cover everything: the bound at zero cutoffs is 2·∫w.
        let total = sobolev_weight_integral(o).unwrap() / (2.0 * PI).powi(2);
        assert!((full - 2.0 * total).abs() < 1e-12);
    }

    #[test]
    fn pairing_conjugates_the_test_function() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        let mu = measure_char(&[KineticPoint::new(0.3, 0.1)], &[1.0], &g).unwrap();
        let f = SpectralField::from_fn(&g, |xi, eta| C64::from_polar(1.0, 0.3 * xi + 0.1 * eta));
        let p = pairing(&mu, &f).unwrap();
        let area: f64 = g.lebesgue_weights().iter().sum();
        assert!((p.re - area / (4.0 * PI * PI)).abs() < 1e-12);
        assert!(p.im.abs() < 1e-12);
    }
}
