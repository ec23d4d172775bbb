//! Acceptance suite: every criterion at full tolerance, one status line each.
//!
//! The status lines are written straight to stderr so that they show up in
//! the test log even for passing tests.

use kinlab::convolution::{z_direct, z_field_at, ZAccumulator};
use kinlab::harness::{run_lln, run_mild_residual, run_zdecay, Experiment, ExperimentConfig, SamplerKind};
use kinlab::mildsolver::{picard_iterate, solve, DensityField, PicardStart, SolverOptions};
use kinlab::particles::{simulate, GaussianMixture, InitialSampler, InteractionKernel, Recording, SimConfig};
use kinlab::semigroup::{apply_pt_function, kernel_time_regularity_check, semigroup_mc_oracle, Noise, PhysicalField, PhysicalGrid};
use kinlab::spectral::{dual_norm, measure_char, spacing_error_estimate, tail_norm_certificate, FrequencyGrid, KineticPoint, SobolevOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::io::Write;
use std::time::Instant;

const SEED: u64 = 20_240_601;

fn report(k: usize, name: &str, passed: bool, start: Instant, detail: &str) {
    let line =
        format!("criterion {k:>2} {name:<32} {} ({:.1}s) {detail}\n", if passed { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(passed, "criterion {k} ({name}) failed: {detail}");
}

fn order6() -> SobolevOrder {
    SobolevOrder::new(6.0, 1).unwrap()
}

fn test_functions() -> [fn(f64, f64) -> f64; 3] {
    [
        |x, v| (-(x * x) / 4.0 - v * v / 2.0).exp(),
        |x, v| (-(x - 1.0).powi(2) / 3.0 - (v + 0.5).powi(2)).exp() * (1.0 + 0.5 * x.sin()),
        |x, v| (-(x * x + v * v) / 6.0).exp() * v.cos(),
    ]
}

#[test]
fn criterion_01_semigroup_matches_monte_carlo() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 128, 128).unwrap();
    let pts: Vec<(f64, f64)> = (0..20).map(|_| (rng.random_range(-2.0..2.0), rng.random_range(-1.5..1.5))).collect();
    let (mut worst, mut outside, mut total) = (0.0f64, 0usize, 0usize);
    for (q, f) in test_functions().into_iter().enumerate() {
        let field = PhysicalField::from_fn(g, f);
        for (ti, t) in [0.1, 0.5, 1.0].into_iter().enumerate() {
            let spectral = apply_pt_function(&field, t, Noise::Kinetic).unwrap().eval_at(&pts);
            for (i, &(x, v)) in pts.iter().enumerate() {
                let seed = SEED ^ ((q * 1000 + ti * 100 + i) as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let (mc, se) = semigroup_mc_oracle(&f, KineticPoint::new(x, v), t, 100_000, seed, Noise::Kinetic).unwrap();
                let z = (spectral[i] - mc).abs() / se;
                worst = worst.max(z);
                outside += usize::from(z > 3.0);
                total += 1;
            }
        }
    }
    let passed = outside == 0;
    let detail = format!("{outside} of {total} comparisons beyond 3 SE; largest deviation {worst:.2} SE (10⁵ samples)");
    report(1, "semigroup-vs-monte-carlo", passed, start, &detail);
}

#[test]
fn criterion_02_semigroup_law() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 64, 256).unwrap();
    let mut worst = 0.0f64;
    for f in test_functions() {
        let f = PhysicalField::from_fn(g, f);
        for _ in 0..10 {
            let (t, s) = (rng.random_range(0.0..0.5), rng.random_range(0.0..0.5));
            let a = apply_pt_function(&f, t + s, Noise::Kinetic).unwrap();
            let b = apply_pt_function(&apply_pt_function(&f, s, Noise::Kinetic).unwrap(), t, Noise::Kinetic).unwrap();
            worst = worst.max(a.axpby(1.0, &b, -1.0).unwrap().l2_norm() / f.l2_norm());
        }
    }
    report(2, "semigroup-law", worst <= 1e-8, start, &format!("max relative defect {worst:.2e} over 10 (t,s) pairs × 3 functions"));
}

#[test]
fn criterion_03_gaussian_pushforward() {
    let start = Instant::now();
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 256, 256).unwrap();
    let (mx, mv, sx, sv) = (-0.5, 0.4, 0.6, 0.5);
    let nu = DensityField::from_mixture(g, &GaussianMixture::single(mx, mv, sx, sv)).unwrap();
    let run = solve(&nu, 1.0, 0.05, &InteractionKernel::zero(), &SolverOptions::default(), &[20], None).unwrap();
    // Free transport of the initial covariance plus the kinetic Gaussian at t = 1.
    let (a, b, c) = (sx * sx + sv * sv + 2.0 / 3.0, sv * sv + 1.0, sv * sv + 2.0);
    let det = a * c - b * b;
    let want = PhysicalField::from_fn(g, |x, v| {
        let (dx, dv) = (x - mx - mv, v - mv);
        (-0.5 * (c * dx * dx - 2.0 * b * dx * dv + a * dv * dv) / det).exp() / (2.0 * PI * det.sqrt())
    });
    let err = run.snapshots[0].density.field().axpby(1.0, &want, -1.0).unwrap().max_abs();
    report(3, "gaussian-pushforward", err <= 1e-4, start, &format!("sup error {err:.2e} at T=1"));
}

#[test]
fn criterion_04_kernel_time_regularity() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 4);
    let total = 1_000_000usize;
    let (mut bad, mut worst_ratio) = (0usize, 0.0f64);
    let mut example = None;
    for _ in 0..total {
        let mut v = [rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>()];
        v.sort_by(f64::total_cmp);
        let eta = rng.random_range(0.1..32.0) * if rng.random::<bool>() { 1.0 } else { -1.0 };
        let xi = rng.random_range(-32.0..32.0);
        let p = kernel_time_regularity_check(v[0], v[1], v[2], xi, eta).unwrap();
        if !p.holds() {
            bad += 1;
            if p.rhs > 0.0 && p.lhs / p.rhs > worst_ratio {
                worst_ratio = p.lhs / p.rhs;
                example = Some((v, xi, eta));
            }
        }
    }
    let detail = match example {
        Some((v, xi, eta)) => format!(
            "{bad} of {total} tuples violate the bound; worst lhs/rhs = {worst_ratio:.2} at r={:.3}, u={:.3}, t={:.3}, ξ={xi:.2}, η={eta:.2}",
            v[0], v[1], v[2]
        ),
        None => format!("0 of {total} tuples violate the bound"),
    };
    report(4, "kernel-time-regularity", bad == 0, start, &detail);
}

#[test]
fn criterion_05_uniform_measure_bound() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 5);
    let g = FrequencyGrid::new(16.0, 16.0, 129, 129).unwrap();
    let o = order6();
    let delta = dual_norm(&measure_char(&[KineticPoint::new(0.0, 0.0)], &[1.0], &g).unwrap(), o).unwrap();
    let tail = tail_norm_certificate(o, g.cutoffs()).unwrap();
    let (mut worst, mut bad) = (f64::NEG_INFINITY, 0usize);
    for _ in 0..1000 {
        let n = rng.random_range(1..40);
        let pts: Vec<KineticPoint> = (0..n).map(|_| KineticPoint::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0))).collect();
        let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = raw.iter().sum();
        let masses: Vec<f64> = raw.iter().map(|m| m / total).collect();
        let extent = pts.iter().map(|p| p.x.abs().max(p.v.abs())).fold(0.0, f64::max);
        let spacing = spacing_error_estimate(&g, o, (2.0 * extent).powi(4), (2.0 * extent).powi(2)).unwrap();
        let value = dual_norm(&measure_char(&pts, &masses, &g).unwrap(), o).unwrap();
        let excess = value - (delta + tail + spacing);
        worst = worst.max(excess);
        bad += usize::from(excess > 0.0);
    }
    let detail = format!("{bad} of 1000 measures exceed the bound; largest excess {worst:.2e} (point mass {delta:.4e})");
    report(5, "uniform-measure-bound", bad == 0, start, &detail);
}

#[test]
fn criterion_06_mild_identity_residual() {
    let start = Instant::now();
    let cfg = ExperimentConfig::defaults(Experiment::MildResidual);
    let r = run_mild_residual(&cfg).unwrap();
    let passed = r.monotone && r.ratio <= 0.25;
    let list: Vec<String> = r.dts.iter().zip(&r.residuals).map(|(dt, res)| format!("dt={dt:.0e}: {res:.3e}")).collect();
    let detail = format!("{}; monotone={}, finest/coarsest={:.3}", list.join(", "), r.monotone, r.ratio);
    report(6, "mild-identity-residual", passed, start, &detail);
}

#[test]
fn criterion_07_stochastic_convolution_two_paths() {
    let start = Instant::now();
    let path = simulate(&SimConfig {
        n: 64,
        t_end: 1.0,
        dt: 1.0 / 128.0,
        noise: Noise::Kinetic,
        kernel: InteractionKernel::kuramoto(0.5),
        initial: InitialSampler::Iid(GaussianMixture::default_initial()),
        seed: SEED,
        recording: Recording::EveryStep,
    })
    .unwrap();
    let steps = vec![16, 32, 64, 96, 128];
    let acc = ZAccumulator::new(&path, FrequencyGrid::new(12.0, 12.0, 97, 97).unwrap(), steps.clone()).unwrap();
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 128, 256).unwrap();
    let mut worst = 0.0f64;
    for f in test_functions() {
        let f = PhysicalField::from_fn(g, f);
        let f_hat = f.transform(acc.grid());
        for &s in &steps {
            let a = z_field_at(&acc, s).unwrap().pair(&f_hat).unwrap();
            let b = z_direct(&acc, &f, s).unwrap();
            worst = worst.max((a - b).abs() / b.abs());
        }
    }
    report(7, "z-two-path-agreement", worst <= 1e-4, start, &format!("max relative gap {worst:.2e} over 3 functions × 5 snapshots"));
}

fn slope_detail(r: &kinlab::harness::ConvergenceReport) -> String {
    let s = r.slope.as_ref().expect("slope fitted");
    format!(
        "slope {:.3} (95% CI [{:.3}, {:.3}]); means {:.3e} → {:.3e}, ratio {:.3}",
        s.slope,
        s.ci.0,
        s.ci.1,
        r.means[0],
        r.means.last().unwrap(),
        r.largest_to_smallest
    )
}

fn in_band(r: &kinlab::harness::ConvergenceReport) -> bool {
    r.slope.as_ref().is_some_and(|s| (-0.65..=-0.35).contains(&s.slope))
}

#[test]
fn criterion_08_stochastic_convolution_decay() {
    let start = Instant::now();
    let r = run_zdecay(&ExperimentConfig::defaults(Experiment::Zdecay)).unwrap();
    report(8, "z-decay-slope", in_band(&r), start, &slope_detail(&r));
}

#[test]
fn criterion_09_mean_field_rate() {
    let start = Instant::now();
    let r = run_lln(&ExperimentConfig::defaults(Experiment::Lln)).unwrap();
    let passed = in_band(&r) && r.largest_to_smallest <= 0.25;
    report(9, "mean-field-rate", passed, start, &slope_detail(&r));
}

#[test]
fn criterion_10_picard_uniqueness() {
    let start = Instant::now();
    let g = PhysicalGrid::new(4.0 * PI, 4.0 * PI, 128, 128).unwrap();
    let nu = DensityField::from_mixture(g, &GaussianMixture::default_initial()).unwrap();
    let fg = FrequencyGrid::new(8.0, 8.0, 33, 33).unwrap();
    let o = order6();
    let k = InteractionKernel::kuramoto(0.5);
    let opts = SolverOptions::default();
    let tol = 1e-9;
    let steps = 16;
    let picard = |l: usize, s: PicardStart| picard_iterate(&nu, 1.0, l, &k, &opts, tol, 80, s, &fg, o).unwrap();
    let norm = |a: &PhysicalField, b: &PhysicalField| dual_norm(&a.axpby(1.0, b, -1.0).unwrap().transform(&fg), o).unwrap();
    let a = picard(steps, PicardStart::FreeFlow);
    let b = picard(steps, PicardStart::Frozen);
    let fine = picard(2 * steps, PicardStart::FreeFlow);
    let gap_starts = a.path.iter().zip(&b.path).map(|(x, y)| norm(x.field(), y.field())).fold(0.0, f64::max);

    let h = 1.0 / steps as f64;
    let all: Vec<usize> = (0..=steps).collect();
    let all_fine: Vec<usize> = (0..=2 * steps).collect();
    let coarse_run = solve(&nu, 1.0, h, &k, &opts, &all, Some(&fg)).unwrap();
    let fine_run = solve(&nu, 1.0, h / 2.0, &k, &opts, &all_fine, Some(&fg)).unwrap();
    let (mut gap_solver, mut est_picard, mut est_solver) = (0.0f64, 0.0f64, 0.0f64);
    for l in 0..=steps {
        let p = a.path[l].field();
        let s = coarse_run.at_step(l).unwrap().density.field();
        gap_solver = gap_solver.max(norm(p, s));
        est_picard = est_picard.max(norm(p, fine.path[2 * l].field()) * 4.0 / 3.0);
        est_solver = est_solver.max(norm(s, fine_run.at_step(2 * l).unwrap().density.field()) * 4.0 / 3.0);
    }
    let combined = tol + est_picard + est_solver;
    let passed = a.converged && b.converged && gap_starts <= 2.0 * tol && gap_solver <= combined;
    let detail = format!(
        "{}/{} iterations, starts differ by {gap_starts:.2e}; Picard vs solver {gap_solver:.2e} ≤ {combined:.2e} \
         (Picard error est. {est_picard:.2e}, solver error est. {est_solver:.2e})",
        a.iterations(),
        b.iterations()
    );
    report(10, "picard-uniqueness", passed, start, &detail);
}

#[test]
fn criterion_11_lattice_initial_data() {
    let start = Instant::now();
    let mut cfg = ExperimentConfig::defaults(Experiment::Lln);
    cfg.particles.sampler = SamplerKind::Lattice;
    let r = run_lln(&cfg).unwrap();
    let passed = in_band(&r) && r.largest_to_smallest <= 0.25;
    report(11, "lattice-initial-data", passed, start, &slope_detail(&r));
}
