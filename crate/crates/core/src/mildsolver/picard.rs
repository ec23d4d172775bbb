use super::density::{field_char, DensityField};
use super::{nonlinearity, SolverOptions};
use crate::error::{Error, Result};
use crate::particles::InteractionKernel;
use crate::semigroup::{apply_pt_density, PhysicalField};
use crate::spectral::{dual_norm, FrequencyGrid, SobolevOrder};
use std::sync::Arc;

/// Initial iterate of the Picard scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PicardStart {
    /// `ν^{(0)}_t = S_t ν₀` (the interaction-free flow).
    FreeFlow,
    /// `ν^{(0)}_t = ν₀` for all `t`.
    Frozen,
}

/// Result of [`picard_iterate`].
#[derive(Clone, Debug)]
pub struct PicardRun {
    /// Coarse time grid `t_l = l T / L`.
    pub times: Vec<f64>,
    /// Final iterate on the coarse time grid.
    pub path: Vec<DensityField>,
    /// `sup_l ‖ν^{(k+1)}_l − ν^{(k)}_l‖_{−s}` after each iteration.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl PicardRun {
    pub fn iterations(&self) -> usize {
        self.residuals.len()
    }
}

/// Global-in-time fixed-point iteration of the mild formulation
/// `ν_t = S_t ν₀ + ∫₀ᵗ S_{t−r} N(ν_r) dr` on `L` coarse steps, with the
/// `r`-integral by the trapezoid rule. Stops when successive iterates differ
/// by less than `tol` in `sup_t` dual norm; otherwise reports the residual
/// history with `converged = false`.
#[allow(clippy::too_many_arguments)]
pub fn picard_iterate(
    nu0: &DensityField,
    t_end: f64,
    steps: usize,
    kernel: &InteractionKernel,
    opts: &SolverOptions,
    tol: f64,
    max_iter: usize,
    start: PicardStart,
    freq: &Arc<FrequencyGrid>,
    order: SobolevOrder,
) -> Result<PicardRun> {
    if steps == 0 || !(t_end.is_finite() && t_end > 0.0) || !(tol > 0.0) || max_iter == 0 {
        return Err(Error::invalid("Picard needs T > 0, L ≥ 1, tol > 0 and max_iter ≥ 1"));
    }
    let h = t_end / steps as f64;
    let times: Vec<f64> = (0..=steps).map(|l| l as f64 * h).collect();
    let mut free = vec![nu0.field().clone()];
    for l in 0..steps {
        free.push(apply_pt_density(&free[l], h, opts.noise)?);
    }
    let mut cur: Vec<PhysicalField> = match start {
        PicardStart::FreeFlow => free.clone(),
        PicardStart::Frozen => vec![nu0.field().clone(); steps + 1],
    };
    let mut residuals = Vec::new();
    for _ in 0..max_iter {
        let n: Vec<PhysicalField> = cur.iter().map(|f| nonlinearity(f, kernel)).collect::<Result<_>>()?;
        // R_1 = S_h(N_0/2), R_{l+1} = S_h(R_l + N_l); ∫₀^{t_l} ≈ h(R_l + N_l/2).
        let mut next = vec![free[0].clone()];
        let mut r = apply_pt_density(&n[0].axpby(0.5, &n[0], 0.0)?, h, opts.noise)?;
        for l in 1..=steps {
            next.push(free[l].axpby(1.0, &r.axpby(1.0, &n[l], 0.5)?, h)?);
            if l < steps {
                r = apply_pt_density(&r.axpby(1.0, &n[l], 1.0)?, h, opts.noise)?;
            }
        }
        let mut res: f64 = 0.0;
        for (a, b) in next.iter().zip(&cur) {
            let d = a.axpby(1.0, b, -1.0)?;
            res = res.max(dual_norm(&field_char(&d, freq), order)?);
        }
        if next.iter().any(|f| !f.is_finite()) {
            return Err(Error::Numerical("Picard iterate became non-finite".into()));
        }
        cur = next;
        residuals.push(res);
        if res < tol {
            let path = cur.into_iter().zip(&times).map(|(f, &t)| DensityField::raw(f, t)).collect();
            return Ok(PicardRun { times, path, residuals, converged: true });
        }
    }
    log::warn!("Picard iteration did not converge: residuals {residuals:?}");
    let path = cur.into_iter().zip(&times).map(|(f, &t)| DensityField::raw(f, t)).collect();
    Ok(PicardRun { times, path, residuals, converged: false })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::GaussianMixture;
    use crate::semigroup::PhysicalGrid;
    use std::f64::consts::PI;

    fn setup() -> (DensityField, Arc<FrequencyGrid>, SobolevOrder) {
        let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 64, 64).unwrap();
        let nu = DensityField::from_mixture(g, &GaussianMixture::default_initial()).unwrap();
        (nu, FrequencyGrid::new(8.0, 8.0, 33, 33).unwrap(), SobolevOrder::new(6.0, 1).unwrap())
    }

    #[test]
    fn zero_kernel_converges_in_one_iteration() {
        let (nu, fg, o) = setup();
        let run =
            picard_iterate(&nu, 1.0, 8, &InteractionKernel::zero(), &SolverOptions::default(), 1e-12, 5, PicardStart::FreeFlow, &fg, o)
                .unwrap();
        assert!(run.converged);
        assert_eq!(run.iterations(), 1);
        assert_eq!(run.residuals[0], 0.0);
    }

    #[test]
    fn starting_iterates_reach_the_same_fixed_point() {
        let (nu, fg, o) = setup();
        let k = InteractionKernel::kuramoto(0.5);
        let tol = 1e-9;
        let a = picard_iterate(&nu, 1.0, 8, &k, &SolverOptions::default(), tol, 50, PicardStart::FreeFlow, &fg, o).unwrap();
        let b = picard_iterate(&nu, 1.0, 8, &k, &SolverOptions::default(), tol, 50, PicardStart::Frozen, &fg, o).unwrap();
        assert!(a.converged && b.converged);
        for (x, y) in a.path.iter().zip(&b.path) {
            let d = x.field().axpby(1.0, y.field(), -1.0).unwrap();
            assert!(dual_norm(&field_char(&d, &fg), o).unwrap() < 2.0 * tol);
        }
    }

    #[test]
    fn non_convergence_is_reported() {
        let (nu, fg, o) = setup();
        let run = picard_iterate(
            &nu,
            1.0,
            8,
            &InteractionKernel::kuramoto(0.5),
            &SolverOptions::default(),
            1e-30,
            2,
            PicardStart::Frozen,
            &fg,
            o,
        )
        .unwrap();
        assert!(!run.converged);
        assert_eq!(run.residuals.len(), 2);
    }
}
