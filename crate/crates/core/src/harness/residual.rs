use super::config::ExperimentConfig;
use crate::convolution::{mild_identity_residual, MildIdentityTerms, ZAccumulator};
use crate::error::{Error, Result};
use crate::particles::{simulate, simulate_with, Recording, SimConfig};
use crate::semigroup::{PhysicalField, PhysicalGrid};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Outcome of the mild-identity discretization study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub config_hash: String,
    pub seed: u64,
    pub n: usize,
    pub dts: Vec<f64>,
    pub residuals: Vec<f64>,
    pub terms: Vec<(f64, f64, f64, f64)>,
    /// Residuals strictly decrease along `dts`.
    pub monotone: bool,
    /// Finest residual over coarsest residual.
    pub ratio: f64,
}

/// The smooth test function `exp(−(x−0.3)²/2 − (v+0.2)²/1.5)` on a
/// `128 × 256` grid over `[−4π, 4π)²`.
pub fn gaussian_test_function() -> PhysicalField {
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 128, 256).expect("valid grid");
    PhysicalField::from_fn(g, |x, v| (-(x - 0.3).powi(2) / 2.0 - (v + 0.2).powi(2) / 1.5).exp())
}

/// Evaluates the mild identity at `T` on coupled paths: the finest step
/// is simulated, coarser ones reuse the initial points and the aggregated
/// increments of the same Brownian motions.
pub fn run_mild_residual(cfg: &ExperimentConfig) -> Result<ResidualReport> {
    cfg.validate()?;
    let r = &cfg.residual;
    let mut dts = r.dts.clone();
    dts.sort_by(|a, b| b.total_cmp(a));
    for w in dts.windows(2) {
        if ((w[0] / w[1]) - 2.0).abs() > 1e-9 {
            return Err(Error::Config("residual.dts must halve successively".into()));
        }
    }
    let finest = *dts.last().unwrap();
    let base = SimConfig {
        n: r.n,
        t_end: cfg.model.t_end,
        dt: finest,
        noise: cfg.model.noise,
        kernel: cfg.model.kernel.build()?,
        initial: cfg.initial_sampler(),
        seed: cfg.seed,
        recording: Recording::EveryStep,
    };
    let fine = simulate(&base)?;
    let initial = fine.state_at_step(0).unwrap().to_vec();
    let f = gaussian_test_function();
    let freq = cfg.frequency.build()?;
    let mut paths = vec![fine];
    for _ in 1..dts.len() {
        let prev = paths.last().unwrap();
        let inc = prev.increments().coarsen()?;
        let c = SimConfig { dt: inc.dt(), ..base.clone() };
        paths.push(simulate_with(&c, initial.clone(), inc)?);
    }
    paths.reverse();
    let mut terms = Vec::new();
    for p in &paths {
        let m = p.n_steps();
        let acc = ZAccumulator::new(p, freq.clone(), vec![m])?;
        terms.push(mild_identity_residual(p, &acc, &f, m)?);
    }
    let residuals: Vec<f64> = terms.iter().map(MildIdentityTerms::residual).collect();
    Ok(ResidualReport {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        n: r.n,
        monotone: residuals.windows(2).all(|w| w[1] < w[0]),
        ratio: residuals.last().unwrap() / residuals[0],
        dts,
        residuals,
        terms: terms.iter().map(|t| (t.lhs, t.initial, t.drift, t.stochastic)).collect(),
    })
}
