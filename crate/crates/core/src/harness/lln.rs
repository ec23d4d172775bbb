use super::config::ExperimentConfig;
use super::report::{replica_seed, ConvergenceReport};
use crate::convolution::{z_dual_norm_profile, ZAccumulator};
use crate::error::{Error, Result};
use crate::mildsolver::{solve, DensityField, SolverOptions};
use crate::particles::{empirical_char, simulate, Recording, SimConfig};
use crate::semigroup::{CharSource, PhysicalGrid};
use crate::spectral::{dual_norm, FrequencyGrid, SpectralField};
use crate::C64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

/// The deterministic limit `ν̂_t` at the snapshot times, with the evidence
/// that its discretization error is negligible.
#[derive(Clone, Debug)]
pub struct SolverReference {
    pub chars: Vec<SpectralField>,
    /// Self-convergence estimate `max_t ‖ν̂^{ref}_t − ν̂_t‖_{−s}` (time step
    /// by Richardson plus grid doubling).
    pub bias_estimate: f64,
    /// `E‖ν̂^N_0 − ν̂_0‖_{−s}` for IID sampling at the largest `N`.
    pub expected_mc_error: f64,
}

fn reference_key(cfg: &ExperimentConfig) -> Result<String> {
    let text = serde_json::to_string(&(
        &cfg.model,
        &cfg.solver,
        &cfg.frequency,
        cfg.sobolev_s,
        cfg.snapshot_steps()?,
        cfg.particles.n_ladder.last(),
    ))
    .expect("serializable");
    Ok(Sha256::digest(text.as_bytes()).iter().map(|b| format!("{b:02x}")).collect())
}

fn run_solver(cfg: &ExperimentConfig, grid: PhysicalGrid, refine: usize, freq: &Arc<FrequencyGrid>) -> Result<Vec<SpectralField>> {
    let stride = cfg.solver_stride()?;
    let steps: Vec<usize> = cfg.snapshot_steps()?.iter().map(|s| s / stride * refine).collect();
    let nu0 = DensityField::from_mixture(grid, &cfg.model.initial)?;
    let opts = SolverOptions { noise: cfg.model.noise, boundary_tol: cfg.solver.boundary_tol, ..Default::default() };
    let kernel = cfg.model.kernel.build()?;
    let run = solve(&nu0, cfg.model.t_end, cfg.solver.dt / refine as f64, &kernel, &opts, &steps, Some(freq))?;
    Ok(run.snapshots.into_iter().map(|s| s.char.expect("requested")).collect())
}

fn max_distance(a: &[SpectralField], b: &[SpectralField], cfg: &ExperimentConfig) -> Result<f64> {
    let order = cfg.order()?;
    let mut worst: f64 = 0.0;
    for (x, y) in a.iter().zip(b) {
        worst = worst.max(dual_norm(&x.sub(y)?, order)?);
    }
    Ok(worst)
}

/// Computes (once per process and configuration) the solver reference for
/// an LLN study and enforces the bias contract: the self-convergence
/// estimate must be below `bias_fraction` of the expected Monte Carlo error
/// at the largest `N`, otherwise `Error::Numerical`.
pub fn solver_reference(cfg: &ExperimentConfig) -> Result<Arc<SolverReference>> {
    static CACHE: OnceLock<Mutex<HashMap<String, Arc<SolverReference>>>> = OnceLock::new();
    let key = reference_key(cfg)?;
    let cache = CACHE.get_or_init(Default::default);
    if let Some(r) = cache.lock().unwrap().get(&key) {
        return Ok(r.clone());
    }
    let freq = cfg.frequency.build()?;
    let grid = cfg.physical_grid()?;
    let s = &cfg.solver;
    let double = PhysicalGrid::new(s.lx, s.lv, 2 * s.nx, 2 * s.nv).map_err(|e| Error::Config(e.to_string()))?;
    let (coarse, (fine, dense)) = rayon::join(
        || run_solver(cfg, grid, 1, &freq),
        || rayon::join(|| run_solver(cfg, grid, 2, &freq), || run_solver(cfg, double, 2, &freq)),
    );
    let (coarse, fine, dense) = (coarse?, fine?, dense?);
    // Second order in time: the finer run's error is about a third of the
    // difference; the doubled grid measures the spatial part.
    let bias_estimate = max_distance(&coarse, &fine, cfg)? / 3.0 + max_distance(&fine, &dense, cfg)?;
    let mixture = &cfg.model.initial;
    let w = freq.sobolev_weights(-cfg.sobolev_s);
    let mut second_moment = 0.0;
    for (j, &xi) in freq.xi().iter().enumerate() {
        for (k, &eta) in freq.eta().iter().enumerate() {
            let z: C64 = mixture.char_at(xi, eta);
            second_moment += w[freq.index(j, k)] * (1.0 - z.norm_sqr());
        }
    }
    let n_max = *cfg.particles.n_ladder.last().unwrap() as f64;
    let expected_mc_error = (second_moment / n_max).sqrt() / (4.0 * PI * PI);
    log::info!("solver reference: bias estimate {bias_estimate:.3e}, expected Monte Carlo error {expected_mc_error:.3e}");
    if !(bias_estimate <= s.bias_fraction * expected_mc_error) {
        return Err(Error::Numerical(format!(
            "solver bias check failed: self-convergence estimate {bias_estimate:.3e} exceeds {} × expected Monte Carlo error {expected_mc_error:.3e}; refine solver.dt or the grid",
            s.bias_fraction
        )));
    }
    let r = Arc::new(SolverReference { chars: fine, bias_estimate, expected_mc_error });
    cache.lock().unwrap().insert(key, r.clone());
    Ok(r)
}

fn sim_config(cfg: &ExperimentConfig, n: usize, seed: u64, recording: Recording) -> Result<SimConfig> {
    Ok(SimConfig {
        n,
        t_end: cfg.model.t_end,
        dt: cfg.particles.dt,
        noise: cfg.model.noise,
        kernel: cfg.model.kernel.build()?,
        initial: cfg.initial_sampler(),
        seed,
        recording,
    })
}

fn seeds(cfg: &ExperimentConfig) -> Vec<Vec<u64>> {
    cfg.particles.n_ladder.iter().map(|&n| (0..cfg.particles.replicas).map(|r| replica_seed(cfg.seed, n, r)).collect()).collect()
}

fn snapshot_times(cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    Ok(cfg.snapshot_steps()?.iter().map(|&s| s as f64 * cfg.particles.dt).collect())
}

/// The law-of-large-numbers study: for every `N` and replica, simulate the
/// particle system and record `max_t ‖ν̂^N_t − ν̂_t‖_{−s}` over the
/// snapshots against the solver reference; aggregate and fit the slope.
pub fn run_lln(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let reference = solver_reference(cfg)?;
    let freq = reference.chars[0].grid().clone();
    let order = cfg.order()?;
    let steps = cfg.snapshot_steps()?;
    let seeds = seeds(cfg);
    let mut profiles = Vec::new();
    for (k, &n) in cfg.particles.n_ladder.iter().enumerate() {
        log::info!("lln: N = {n}, {} replicas", seeds[k].len());
        let rows = seeds[k]
            .par_iter()
            .map(|&seed| {
                let path = simulate(&sim_config(cfg, n, seed, Recording::Steps(steps.clone()))?)?;
                (0..steps.len())
                    .map(|q| dual_norm(&empirical_char(&path, q, &freq)?.sub(&reference.chars[q])?, order))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        profiles.push(rows);
    }
    let mut diag = BTreeMap::new();
    diag.insert("solver_bias_estimate".to_string(), reference.bias_estimate);
    diag.insert("expected_mc_error_largest_n".to_string(), reference.expected_mc_error);
    ConvergenceReport::assemble(
        "lln",
        cfg.hash(),
        cfg.seed,
        "max over snapshots of the dual Sobolev distance between empirical and reference measures",
        cfg.particles.n_ladder.clone(),
        seeds,
        profiles,
        snapshot_times(cfg)?,
        diag,
    )
}

/// The stochastic-convolution decay study: replica values of
/// `max_t ‖z^N_t‖_{−s}` over the snapshots for every `N`.
pub fn run_zdecay(cfg: &ExperimentConfig) -> Result<ConvergenceReport> {
    cfg.validate()?;
    let freq = cfg.frequency.build()?;
    let order = cfg.order()?;
    let steps = cfg.snapshot_steps()?;
    let seeds = seeds(cfg);
    let mut profiles = Vec::new();
    for (k, &n) in cfg.particles.n_ladder.iter().enumerate() {
        log::info!("zdecay: N = {n}, {} replicas", seeds[k].len());
        let rows = seeds[k]
            .par_iter()
            .map(|&seed| {
                let path = simulate(&sim_config(cfg, n, seed, Recording::EveryStep)?)?;
                let acc = ZAccumulator::new(&path, freq.clone(), steps.clone())?;
                Ok(z_dual_norm_profile(&acc, order)?.into_iter().map(|(_, v)| v).collect())
            })
            .collect::<Result<Vec<Vec<f64>>>>()?;
        profiles.push(rows);
    }
    ConvergenceReport::assemble(
        "zdecay",
        cfg.hash(),
        cfg.seed,
        "max over snapshots of the dual Sobolev norm of the stochastic convolution",
        cfg.particles.n_ladder.clone(),
        seeds,
        profiles,
        snapshot_times(cfg)?,
        BTreeMap::new(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{Experiment, KernelConfig};

    fn small(experiment: Experiment) -> ExperimentConfig {
        let mut c = ExperimentConfig::defaults(experiment);
        c.model.t_end = 0.25;
        c.particles.n_ladder = vec![16, 64, 256];
        c.particles.replicas = 4;
        c.particles.snapshots = 5;
        c.solver.nx = 128;
        c.solver.nv = 128;
        c.frequency = crate::harness::config::FrequencyConfig { xi_max: 8.0, eta_max: 8.0, n_xi: 33, n_eta: 33 };
        if experiment == Experiment::Zdecay {
            c.particles.dt = 1.0 / 32.0;
            c.solver.dt = 1.0 / 32.0;
        }
        c
    }

    #[test]
    fn small_lln_study_is_deterministic() {
        let c = small(Experiment::Lln);
        let a = run_lln(&c).unwrap();
        let b = run_lln(&c).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.errors.len(), 3);
        assert!(a.means[2] < a.means[0]);
        assert!(a.diagnostics["solver_bias_estimate"] < 0.1 * a.diagnostics["expected_mc_error_largest_n"]);
    }

    #[test]
    fn free_transport_error_does_not_grow() {
        let mut c = small(Experiment::Lln);
        c.model.noise = crate::semigroup::Noise::Off;
        c.model.kernel = KernelConfig::Zero;
        c.particles.n_ladder = vec![256];
        c.particles.replicas = 1;
        c.particles.sampler = crate::harness::config::SamplerKind::Lattice;
        let r = run_lln(&c).unwrap();
        let p = &r.profiles[0][0];
        // Free transport is a contraction of this norm up to the shear of
        // the frequency weight, a factor (1 + T)^{2s/3}-type constant.
        assert!(p.last().unwrap() <= &(3.0 * p[0]), "{p:?}");
    }

    #[test]
    fn failing_bias_contract_aborts() {
        let mut c = small(Experiment::Lln);
        c.solver.bias_fraction = 1e-12;
        c.seed = 99;
        assert!(run_lln(&c).unwrap_err().is_numerical());
    }

    #[test]
    fn small_zdecay_study_decays() {
        let r = run_zdecay(&small(Experiment::Zdecay)).unwrap();
        assert!(r.means[0] > r.means[1] && r.means[1] > r.means[2]);
        assert!(r.profiles[0][0][0] == 0.0);
    }
}
