use super::config::{Experiment, ExperimentConfig};
use super::stats::fit_slope;
use crate::convolution::{mild_identity_residual, z_direct, z_field_at, ZAccumulator};
use crate::error::Result;
use crate::mildsolver::{field_char, picard_iterate, solve, step_mild, DensityField, PicardStart, SolverOptions};
use crate::particles::{
    read_increments, simulate, write_increments, GaussianMixture, InitialSampler, InteractionKernel, Recording, SimConfig,
};
use crate::semigroup::{
    apply_pt_density, apply_pt_function, kernel_time_regularity_check, semigroup_mc_oracle, Noise, PhysicalField, PhysicalGrid,
};
use crate::spectral::{dual_norm, measure_char, spacing_error_estimate, tail_norm_certificate, FrequencyGrid, KineticPoint, SobolevOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

/// Contract checks decide the exit status; probes only report what they
/// measured (they test claims that are not implementation contracts).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    Contract,
    Probe,
}

/// One line of the property suite.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub kind: CheckKind,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

/// Outcome of [`run_verify`].
#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    /// True when every contract check passed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed || c.kind == CheckKind::Probe)
    }

    /// One aligned line per check.
    pub fn render(&self) -> String {
        let mut s = String::new();
        for c in &self.checks {
            let status = match (c.kind, c.passed) {
                (CheckKind::Contract, true) => "PASS",
                (CheckKind::Contract, false) => "FAIL",
                (CheckKind::Probe, true) => "HOLDS",
                (CheckKind::Probe, false) => "VIOLATED",
            };
            s.push_str(&format!("{status:<9} {:<28} {:>7.2}s  {}\n", c.name, c.seconds, c.detail));
        }
        s
    }
}

type CheckFn = fn(u64) -> Result<(bool, String)>;

fn grid() -> PhysicalGrid {
    PhysicalGrid::new(4.0 * PI, 4.0 * PI, 128, 128).expect("valid grid")
}

fn test_functions() -> [fn(f64, f64) -> f64; 3] {
    [
        |x, v| (-(x * x) / 4.0 - v * v / 2.0).exp(),
        |x, v| (-(x - 1.0).powi(2) / 3.0 - (v + 0.5).powi(2)).exp() * (1.0 + 0.5 * x.sin()),
        |x, v| (-(x * x + v * v) / 6.0).exp() * v.cos(),
    ]
}

fn semigroup_oracle(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for (q, f) in test_functions().into_iter().enumerate() {
        let field = PhysicalField::from_fn(grid(), f);
        for t in [0.1, 0.5, 1.0] {
            let pf = apply_pt_function(&field, t, Noise::Kinetic)?;
            let pts: Vec<(f64, f64)> = (0..4).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5))).collect();
            let spectral = pf.eval_at(&pts);
            for (i, &(x, v)) in pts.iter().enumerate() {
                let (mc, se) = semigroup_mc_oracle(&f, KineticPoint::new(x, v), t, 20_000, seed ^ (q * 97 + i) as u64, Noise::Kinetic)?;
                worst = worst.max((spectral[i] - mc).abs() / se);
            }
        }
    }
    Ok((worst <= 4.0, format!("max deviation {worst:.2} standard errors (2·10⁴ samples)")))
}

fn semigroup_law(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 64, 256).expect("valid grid");
    let f = PhysicalField::from_fn(g, test_functions()[0]);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let (t, s) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
        let a = apply_pt_function(&f, t + s, Noise::Kinetic)?;
        let b = apply_pt_function(&apply_pt_function(&f, s, Noise::Kinetic)?, t, Noise::Kinetic)?;
        worst = worst.max(a.axpby(1.0, &b, -1.0)?.l2_norm() / f.l2_norm());
    }
    Ok((worst <= 1e-8, format!("max relative defect {worst:.2e}")))
}

fn duality(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let f = PhysicalField::from_fn(grid(), test_functions()[1]);
    let nu = DensityField::from_mixture(grid(), &GaussianMixture::default_initial())?;
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let t = rng.random_range(0.05..1.0);
        let lhs = apply_pt_density(nu.field(), t, Noise::Kinetic)?.dot(&f)?;
        let rhs = nu.field().dot(&apply_pt_function(&f, t, Noise::Kinetic)?)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok((worst <= 1e-8, format!("max |⟨P*ν,f⟩ − ⟨ν,Pf⟩| = {worst:.2e}")))
}

fn regularity_probe(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut bad, total) = (0usize, 100_000usize);
    for _ in 0..total {
        let mut v = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        v.sort_by(f64::total_cmp);
        let eta = rng.random_range(0.1..32.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let xi = rng.random_range(-32.0..32.0);
        if !kernel_time_regularity_check(v[0], v[1], v[2], xi, eta)?.holds() {
            bad += 1;
        }
    }
    Ok((bad == 0, format!("{bad} of {total} random tuples violate |G(t−r)−G(u−r)| ≤ ¼|η|²(t−u)")))
}

fn pushforward(_: u64) -> Result<(bool, String)> {
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 256, 256).expect("valid grid");
    let (mx, mv, sx, sv) = (-0.5, 0.4, 0.6, 0.5);
    let nu = DensityField::from_mixture(g, &GaussianMixture::single(mx, mv, sx, sv))?;
    let run = solve(&nu, 1.0, 0.05, &InteractionKernel::zero(), &SolverOptions::default(), &[20], None)?;
    let (a, b, c) = (sx * sx + sv * sv + 2.0 / 3.0, sv * sv + 1.0, sv * sv + 2.0);
    let det = a * c - b * b;
    let want = PhysicalField::from_fn(g, |x, v| {
        let (dx, dv) = (x - mx - mv, v - mv);
        (-0.5 * (c * dx * dx - 2.0 * b * dx * dv + a * dv * dv) / det).exp() / (2.0 * PI * det.sqrt())
    });
    let err = run.snapshots[0].density.field().axpby(1.0, &want, -1.0)?.max_abs();
    Ok((err <= 1e-4, format!("sup error {err:.2e} at T=1")))
}

fn mass(_: u64) -> Result<(bool, String)> {
    let nu = DensityField::from_mixture(grid(), &GaussianMixture::default_initial())?;
    let mut worst: f64 = 0.0;
    for k in [InteractionKernel::kuramoto(0.5), InteractionKernel::alignment(1.0)] {
        let (next, _) = step_mild(&nu, 0.02, &k, &SolverOptions::default())?;
        worst = worst.max((next.mass() - nu.mass()).abs());
    }
    Ok((worst <= 1e-12, format!("max mass change per step {worst:.2e}")))
}

fn picard(_: u64) -> Result<(bool, String)> {
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 64, 64).expect("valid grid");
    let nu = DensityField::from_mixture(g, &GaussianMixture::default_initial())?;
    let fg = FrequencyGrid::new(8.0, 8.0, 33, 33)?;
    let o = SobolevOrder::new(6.0, 1)?;
    let k = InteractionKernel::kuramoto(0.5);
    let tol = 1e-9;
    let opts = SolverOptions::default();
    let a = picard_iterate(&nu, 1.0, 8, &k, &opts, tol, 60, PicardStart::FreeFlow, &fg, o)?;
    let b = picard_iterate(&nu, 1.0, 8, &k, &opts, tol, 60, PicardStart::Frozen, &fg, o)?;
    let mut gap: f64 = 0.0;
    for (x, y) in a.path.iter().zip(&b.path) {
        gap = gap.max(dual_norm(&field_char(&x.field().axpby(1.0, y.field(), -1.0)?, &fg), o)?);
    }
    let ok = a.converged && b.converged && gap <= 2.0 * tol;
    Ok((ok, format!("{} / {} iterations, fixed points differ by {gap:.2e}", a.iterations(), b.iterations())))
}

fn uniform_bound(seed: u64) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = FrequencyGrid::new(16.0, 16.0, 129, 129)?;
    let o = SobolevOrder::new(6.0, 1)?;
    let delta = dual_norm(&measure_char(&[KineticPoint::new(0.0, 0.0)], &[1.0], &g)?, o)?;
    let tail = tail_norm_certificate(o, g.cutoffs())?;
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let n = rng.random_range(1..40);
        let pts: Vec<KineticPoint> = (0..n).map(|_| KineticPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let extent = pts.iter().map(|p| p.x.abs().max(p.v.abs())).fold(0.0, f64::max);
        let spacing = spacing_error_estimate(&g, o, (2.0 * extent).powi(4), (2.0 * extent).powi(2))?;
        let value = dual_norm(&measure_char(&pts, &masses, &g)?, o)?;
        worst = worst.max(value - (delta + tail + spacing));
    }
    Ok((worst <= 0.0, format!("largest excess over the point-mass bound {worst:.2e}")))
}

fn z_two_paths(seed: u64) -> Result<(bool, String)> {
    let path = simulate(&SimConfig {
        n: 16,
        t_end: 0.5,
        dt: 1.0 / 64.0,
        noise: Noise::Kinetic,
        kernel: InteractionKernel::kuramoto(0.5),
        initial: InitialSampler::Iid(GaussianMixture::default_initial()),
        seed,
        recording: Recording::EveryStep,
    })?;
    let acc = ZAccumulator::new(&path, FrequencyGrid::new(12.0, 12.0, 97, 97)?, vec![16, 32])?;
    let f = super::residual::gaussian_test_function();
    let f_hat = field_char(&f, acc.grid());
    let mut worst: f64 = 0.0;
    for s in [16, 32] {
        let a = z_field_at(&acc, s)?.pair(&f_hat)?;
        let b = z_direct(&acc, &f, s)?;
        worst = worst.max((a - b).abs() / b.abs());
    }
    Ok((worst <= 1e-4, format!("max relative gap {worst:.2e}")))
}

fn free_identity(seed: u64) -> Result<(bool, String)> {
    let path = simulate(&SimConfig {
        n: 8,
        t_end: 0.5,
        dt: 0.05,
        noise: Noise::Off,
        kernel: InteractionKernel::zero(),
        initial: InitialSampler::Iid(GaussianMixture::default_initial()),
        seed,
        recording: Recording::EveryStep,
    })?;
    let acc = ZAccumulator::new(&path, FrequencyGrid::new(8.0, 8.0, 33, 33)?, vec![10])?;
    let r = mild_identity_residual(&path, &acc, &super::residual::gaussian_test_function(), 10)?.residual();
    Ok((r <= 1e-9, format!("residual {r:.2e}")))
}

fn increments_roundtrip(seed: u64) -> Result<(bool, String)> {
    let path = simulate(&SimConfig {
        n: 7,
        t_end: 0.1,
        dt: 0.01,
        noise: Noise::Kinetic,
        kernel: InteractionKernel::zero(),
        initial: InitialSampler::Iid(GaussianMixture::default_initial()),
        seed,
        recording: Recording::Steps(vec![0]),
    })?;
    let mut buf = Vec::new();
    write_increments(path.increments(), &mut buf)?;
    let back = read_increments(buf.as_slice(), 0.01)?;
    let same = back.raw_db().iter().zip(path.increments().raw_db()).all(|(a, b)| a.to_bits() == b.to_bits())
        && back.raw_di().iter().zip(path.increments().raw_di()).all(|(a, b)| a.to_bits() == b.to_bits());
    Ok((same, format!("{} bytes", buf.len())))
}

fn slope_injection(_: u64) -> Result<(bool, String)> {
    let pairs: Vec<(f64, f64)> = [64.0, 128.0, 256.0, 512.0].iter().map(|&n: &f64| (n, 2.0 * n.powf(-0.5))).collect();
    let s = fit_slope(&pairs)?.slope;
    Ok(((s + 0.5).abs() <= 1e-12, format!("slope {s:.15}")))
}

fn suite(experiment: Experiment) -> Vec<(&'static str, CheckKind, CheckFn)> {
    use CheckKind::*;
    let semigroup: Vec<(&'static str, CheckKind, CheckFn)> = vec![
        ("semigroup-monte-carlo", Contract, semigroup_oracle),
        ("semigroup-law", Contract, semigroup_law),
        ("semigroup-duality", Contract, duality),
        ("kernel-time-regularity", Probe, regularity_probe),
    ];
    let solver: Vec<(&'static str, CheckKind, CheckFn)> = vec![
        ("gaussian-pushforward", Contract, pushforward),
        ("mass-conservation", Contract, mass),
        ("picard-uniqueness", Contract, picard),
    ];
    let rest: Vec<(&'static str, CheckKind, CheckFn)> = vec![
        ("uniform-measure-bound", Contract, uniform_bound),
        ("z-two-path-agreement", Contract, z_two_paths),
        ("mild-identity-free-flow", Contract, free_identity),
        ("increments-round-trip", Contract, increments_roundtrip),
        ("slope-injection", Contract, slope_injection),
    ];
    match experiment {
        Experiment::SemigroupVerify => semigroup,
        Experiment::SolverVerify => solver,
        _ => semigroup.into_iter().chain(solver).chain(rest).collect(),
    }
}

/// Runs the property suite selected by the configuration's experiment
/// (`semigroup-verify`, `solver-verify`, or everything otherwise).
pub fn run_verify(cfg: &ExperimentConfig) -> VerifyReport {
    let checks = suite(cfg.experiment)
        .into_iter()
        .map(|(name, kind, f)| {
            let start = Instant::now();
            let (passed, detail) = match f(cfg.seed) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            let c = Check { name: name.to_string(), kind, passed, detail, seconds: start.elapsed().as_secs_f64() };
            log::info!("{} {}: {}", c.name, if c.passed { "ok" } else { "not ok" }, c.detail);
            c
        })
        .collect();
    VerifyReport { checks }
}
