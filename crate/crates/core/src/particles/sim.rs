use super::kernel::{drift, InteractionKernel};
use super::sampler::InitialSampler;
use crate::error::{Error, Result};
use crate::semigroup::Noise;
use crate::spectral::{FrequencyGrid, KineticPoint, SpectralField};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::sync::Arc;

/// Which time steps keep a copy of the particle state.
#[derive(Clone, Debug, PartialEq)]
pub enum Recording {
    EveryStep,
    /// Strictly increasing step indices in `0..=M`.
    Steps(Vec<usize>),
}

/// Inputs of one particle simulation.
#[derive(Clone, Debug)]
pub struct SimConfig {
    pub n: usize,
    pub t_end: f64,
    pub dt: f64,
    pub noise: Noise,
    pub kernel: InteractionKernel,
    pub initial: InitialSampler,
    pub seed: u64,
    pub recording: Recording,
}

impl SimConfig {
    /// Number of steps `M = T/dt`; rejects non-integer ratios.
    pub fn n_steps(&self) -> Result<usize> {
        if !(self.dt.is_finite() && self.dt > 0.0 && self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid(format!("need dt > 0 and T ≥ 0 (dt={}, T={})", self.dt, self.t_end)));
        }
        let ratio = self.t_end / self.dt;
        let m = ratio.round();
        if (ratio - m).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::invalid(format!("T/dt = {ratio} is not an integer")));
        }
        Ok(m as usize)
    }

    pub fn validate(&self) -> Result<usize> {
        if self.n == 0 {
            return Err(Error::invalid("particle count must be ≥ 1"));
        }
        let m = self.n_steps()?;
        if let Recording::Steps(s) = &self.recording {
            if s.windows(2).any(|w| w[1] <= w[0]) || s.last().is_some_and(|&l| l > m) {
                return Err(Error::invalid("recorded steps must be increasing and within 0..=M"));
            }
        }
        Ok(m)
    }

    fn records(&self, step: usize) -> bool {
        match &self.recording {
            Recording::EveryStep => true,
            Recording::Steps(s) => s.binary_search(&step).is_ok(),
        }
    }
}

/// Independent random-number streams derived from one seed.
pub(crate) fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub(crate) const INITIAL_STREAM: u64 = 0;
pub(crate) const NOISE_STREAM: u64 = 1;

/// Per-step, per-particle Brownian increments `ΔB = B_{t+dt} − B_t` and
/// time integrals `ΔI = ∫_t^{t+dt} (B_s − B_t) ds`, drawn exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct BrownianIncrements {
    n: usize,
    m: usize,
    dt: f64,
    db: Vec<f64>,
    di: Vec<f64>,
}

impl BrownianIncrements {
    /// Exact joint draws: `ΔB ~ N(0, dt)`, `ΔI = (dt/2)ΔB + (dt³/12)^{1/2} Z`.
    pub fn sample<R: rand::Rng + ?Sized>(n: usize, m: usize, dt: f64, rng: &mut R) -> Self {
        let mut db = Vec::with_capacity(n * m);
        let mut di = Vec::with_capacity(n * m);
        let (sd, si) = (dt.sqrt(), (dt * dt * dt / 12.0).sqrt());
        for _ in 0..n * m {
            let z1: f64 = StandardNormal.sample(rng);
            let z2: f64 = StandardNormal.sample(rng);
            let b = sd * z1;
            db.push(b);
            di.push(0.5 * dt * b + si * z2);
        }
        BrownianIncrements { n, m, dt, db, di }
    }

    /// Increments from raw step-major arrays.
    pub fn from_raw(n: usize, m: usize, dt: f64, db: Vec<f64>, di: Vec<f64>) -> Result<Self> {
        if db.len() != n * m || di.len() != n * m {
            return Err(Error::Mismatch(format!("expected {} increments per array", n * m)));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::invalid("increment step must be positive"));
        }
        Ok(BrownianIncrements { n, m, dt, db, di })
    }

    /// Zero increments (noise-free paths).
    pub fn zeros(n: usize, m: usize, dt: f64) -> Self {
        BrownianIncrements { n, m, dt, db: vec![0.0; n * m], di: vec![0.0; n * m] }
    }

    /// The same Brownian paths observed on a grid twice as coarse:
    /// `ΔB = ΔB₁ + ΔB₂`, `ΔI = ΔI₁ + δ·ΔB₁ + ΔI₂`.
    pub fn coarsen(&self) -> Result<Self> {
        if !self.m.is_multiple_of(2) {
            return Err(Error::invalid("coarsening needs an even number of steps"));
        }
        let (n, m2) = (self.n, self.m / 2);
        let mut db = Vec::with_capacity(n * m2);
        let mut di = Vec::with_capacity(n * m2);
        for s in 0..m2 {
            let (a, b) = (2 * s * n, (2 * s + 1) * n);
            for i in 0..n {
                db.push(self.db[a + i] + self.db[b + i]);
                di.push(self.di[a + i] + self.dt * self.db[a + i] + self.di[b + i]);
            }
        }
        Ok(BrownianIncrements { n, m: m2, dt: 2.0 * self.dt, db, di })
    }

    /// All increments multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        BrownianIncrements {
            n: self.n,
            m: self.m,
            dt: self.dt,
            db: self.db.iter().map(|x| c * x).collect(),
            di: self.di.iter().map(|x| c * x).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `ΔB` of every particle at step `s`.
    pub fn db(&self, s: usize) -> &[f64] {
        &self.db[s * self.n..(s + 1) * self.n]
    }

    /// `ΔI` of every particle at step `s`.
    pub fn di(&self, s: usize) -> &[f64] {
        &self.di[s * self.n..(s + 1) * self.n]
    }

    pub fn raw_db(&self) -> &[f64] {
        &self.db
    }

    pub fn raw_di(&self) -> &[f64] {
        &self.di
    }
}

/// Trajectories of the `N` particles with the increments that drove them.
#[derive(Clone, Debug)]
pub struct EnsemblePath {
    times: Vec<f64>,
    recorded_steps: Vec<usize>,
    states: Vec<Vec<KineticPoint>>,
    increments: BrownianIncrements,
    seed: u64,
    config: SimConfig,
}

impl EnsemblePath {
    pub fn n(&self) -> usize {
        self.increments.n
    }

    pub fn n_steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.config.dt
    }

    /// Step times `t_0 = 0 < … < t_M = T`.
    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn recorded_steps(&self) -> &[usize] {
        &self.recorded_steps
    }

    /// Recorded states, aligned with [`EnsemblePath::recorded_steps`].
    pub fn states(&self) -> &[Vec<KineticPoint>] {
        &self.states
    }

    /// Recorded state at step `m`, if kept.
    pub fn state_at_step(&self, m: usize) -> Option<&[KineticPoint]> {
        self.recorded_steps.binary_search(&m).ok().map(|i| self.states[i].as_slice())
    }

    pub fn increments(&self) -> &BrownianIncrements {
        &self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Whether every step state is available.
    pub fn records_every_step(&self) -> bool {
        self.recorded_steps.len() == self.times.len()
    }

    /// Recomputes the state at step `m + 1` from the stored state at `m`.
    pub fn replay_step(&self, m: usize) -> Result<Vec<KineticPoint>> {
        let s = self.state_at_step(m).ok_or_else(|| Error::invalid(format!("step {m} was not recorded")))?;
        if m >= self.n_steps() {
            return Err(Error::invalid("no step after the final time"));
        }
        step(s, self.config.dt, self.increments.db(m), self.increments.di(m), &self.config.kernel, self.config.noise)
    }
}

/// One kinetic Euler step with exact noise:
/// `v' = v + b dt + √2 ΔB`, `x' = x + v dt + √2 ΔI`.
pub fn step(
    state: &[KineticPoint],
    dt: f64,
    db: &[f64],
    di: &[f64],
    kernel: &InteractionKernel,
    noise: Noise,
) -> Result<Vec<KineticPoint>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("step needs dt > 0, got {dt}")));
    }
    if db.len() != state.len() || di.len() != state.len() {
        return Err(Error::Mismatch("increments do not match the particle count".into()));
    }
    let b = drift(state, kernel)?;
    debug_assert!(b.iter().all(|d| d.abs() <= kernel.bound() * (1.0 + 1e-12) + 1e-300));
    let sigma = noise.sigma();
    Ok(state.iter().enumerate().map(|(i, p)| KineticPoint::new(p.x + p.v * dt + sigma * di[i], p.v + b[i] * dt + sigma * db[i])).collect())
}

/// Runs the particle system; deterministic in `(config, seed)`.
pub fn simulate(config: &SimConfig) -> Result<EnsemblePath> {
    let m = config.validate()?;
    let mut rng = stream_rng(config.seed, INITIAL_STREAM);
    let initial = config.initial.sample(config.n, &mut rng)?;
    let mut noise_rng = stream_rng(config.seed, NOISE_STREAM);
    let inc = match config.noise {
        Noise::Kinetic => BrownianIncrements::sample(config.n, m, config.dt, &mut noise_rng),
        Noise::Off => BrownianIncrements::zeros(config.n, m, config.dt),
    };
    simulate_with(config, initial, inc)
}

/// Runs the particle system from given initial points and increments.
pub fn simulate_with(config: &SimConfig, initial: Vec<KineticPoint>, increments: BrownianIncrements) -> Result<EnsemblePath> {
    let m = config.validate()?;
    if initial.len() != config.n || increments.n != config.n || increments.m != m {
        return Err(Error::Mismatch(format!(
            "expected {} particles and {m} steps, got {} points and {}×{} increments",
            config.n,
            initial.len(),
            increments.n,
            increments.m
        )));
    }
    if (increments.dt - config.dt).abs() > 1e-12 * config.dt {
        return Err(Error::Mismatch("increment step differs from the configured dt".into()));
    }
    if initial.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("non-finite initial point"));
    }
    let times: Vec<f64> = (0..=m).map(|s| s as f64 * config.dt).collect();
    let mut recorded_steps = Vec::new();
    let mut states = Vec::new();
    let mut cur = initial;
    for s in 0..=m {
        if config.records(s) {
            recorded_steps.push(s);
            states.push(cur.clone());
        }
        if s == m {
            break;
        }
        cur = step(&cur, config.dt, increments.db(s), increments.di(s), &config.kernel, config.noise)
            .map_err(|e| Error::Numerical(format!("step {s}: {e}")))?;
        if let Some(i) = cur.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!("particle {i} became non-finite at step {}", s + 1)));
        }
    }
    Ok(EnsemblePath { times, recorded_steps, states, increments, seed: config.seed, config: config.clone() })
}

/// Characteristic function of the empirical measure at recorded snapshot
/// `snapshot` (an index into [`EnsemblePath::recorded_steps`]).
pub fn empirical_char(path: &EnsemblePath, snapshot: usize, grid: &Arc<FrequencyGrid>) -> Result<SpectralField> {
    let s = path.states.get(snapshot).ok_or_else(|| Error::invalid(format!("snapshot {snapshot} out of range")))?;
    Ok(crate::spectral::grid_uniform_char(s, grid))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::particles::GaussianMixture;

    fn config(n: usize, noise: Noise, kernel: InteractionKernel) -> SimConfig {
        SimConfig {
            n,
            t_end: 1.0,
            dt: 0.01,
            noise,
            kernel,
            initial: InitialSampler::Iid(GaussianMixture::default_initial()),
            seed: 42,
            recording: Recording::EveryStep,
        }
    }

    #[test]
    fn free_transport_without_noise() {
        let mut c = config(1, Noise::Off, InteractionKernel::zero());
        c.initial = InitialSampler::File(vec![KineticPoint::new(0.0, 1.0)]);
        let p = simulate(&c).unwrap();
        let last = p.states().last().unwrap()[0];
        assert!((last.x - 1.0).abs() < 1e-12 && last.v == 1.0);
    }

    #[test]
    fn simulation_is_bit_reproducible() {
        let c = config(64, Noise::Kinetic, InteractionKernel::kuramoto(0.5));
        let a = simulate(&c).unwrap();
        let b = simulate(&c).unwrap();
        assert_eq!(a.states(), b.states());
        assert_eq!(a.increments(), b.increments());
    }

    #[test]
    fn replay_reproduces_every_step() {
        let c = config(16, Noise::Kinetic, InteractionKernel::alignment(1.0));
        let p = simulate(&c).unwrap();
        for m in [0, 17, 99] {
            assert_eq!(p.replay_step(m).unwrap().as_slice(), p.state_at_step(m + 1).unwrap());
        }
    }

    #[test]
    fn velocity_noise_variance_and_cross_covariance() {
        let dt = 0.05;
        let n = 200_000;
        let mut rng = stream_rng(7, 1);
        let inc = BrownianIncrements::sample(n, 1, dt, &mut rng);
        let state = vec![KineticPoint::new(0.0, 0.0); n];
        let next = step(&state, dt, inc.db(0), inc.di(0), &InteractionKernel::zero(), Noise::Kinetic).unwrap();
        let vv: Vec<f64> = next.iter().map(|p| p.v * p.v).collect();
        let xv: Vec<f64> = next.iter().map(|p| p.x * p.v).collect();
        let xx: Vec<f64> = next.iter().map(|p| p.x * p.x).collect();
        for (vals, want) in [(vv, 2.0 * dt), (xv, dt * dt), (xx, 2.0 * dt.powi(3) / 3.0)] {
            let mean = vals.iter().sum::<f64>() / n as f64;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let se = (var / n as f64).sqrt();
            assert!((mean - want).abs() < 3.0 * se, "{mean} vs {want} ± {se}");
        }
    }

    #[test]
    fn coarsened_increments_have_the_coarse_law() {
        let mut rng = stream_rng(9, 1);
        let fine = BrownianIncrements::sample(100_000, 2, 0.1, &mut rng);
        let coarse = fine.coarsen().unwrap();
        let n = 100_000.0;
        let vb = coarse.db(0).iter().map(|b| b * b).sum::<f64>() / n;
        let cbi = coarse.db(0).iter().zip(coarse.di(0)).map(|(b, i)| b * i).sum::<f64>() / n;
        let vi = coarse.di(0).iter().map(|i| i * i).sum::<f64>() / n;
        let dt: f64 = 0.2;
        assert!((vb / dt - 1.0).abs() < 0.02);
        assert!((cbi / (dt * dt / 2.0) - 1.0).abs() < 0.03);
        assert!((vi / (dt.powi(3) / 3.0) - 1.0).abs() < 0.03);
    }

    #[test]
    fn permuting_particles_permutes_trajectories() {
        let mut c = config(5, Noise::Kinetic, InteractionKernel::alignment(1.0));
        let pts: Vec<KineticPoint> = (0..5).map(|i| KineticPoint::new(i as f64 * 0.3, 1.0 - i as f64 * 0.2)).collect();
        let mut rng = stream_rng(3, 1);
        let inc = BrownianIncrements::sample(5, 100, 0.01, &mut rng);
        c.initial = InitialSampler::File(pts.clone());
        let a = simulate_with(&c, pts.clone(), inc.clone()).unwrap();
        let perm = [3, 0, 4, 1, 2];
        let ppts: Vec<KineticPoint> = perm.iter().map(|&i| pts[i]).collect();
        let mut db = Vec::new();
        let mut di = Vec::new();
        for s in 0..100 {
            db.extend(perm.iter().map(|&i| inc.db(s)[i]));
            di.extend(perm.iter().map(|&i| inc.di(s)[i]));
        }
        let pinc = BrownianIncrements::from_raw(5, 100, 0.01, db, di).unwrap();
        let b = simulate_with(&c, ppts, pinc).unwrap();
        let (la, lb) = (a.states().last().unwrap(), b.states().last().unwrap());
        for (k, &i) in perm.iter().enumerate() {
            assert!((la[i].x - lb[k].x).abs() < 1e-12 && (la[i].v - lb[k].v).abs() < 1e-12);
        }
    }

    #[test]
    fn recording_subset_and_validation() {
        let mut c = config(8, Noise::Kinetic, InteractionKernel::kuramoto(1.0));
        c.recording = Recording::Steps(vec![0, 50, 100]);
        let p = simulate(&c).unwrap();
        assert_eq!(p.recorded_steps(), &[0, 50, 100]);
        c.recording = Recording::Steps(vec![0, 101]);
        assert!(simulate(&c).is_err());
        c.dt = 0.03;
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn kuramoto_smoke_run_with_many_particles() {
        let mut c = config(1024, Noise::Kinetic, InteractionKernel::kuramoto(0.5));
        c.dt = 1e-3;
        c.recording = Recording::Steps(vec![0, 1000]);
        let start = std::time::Instant::now();
        let p = simulate(&c).unwrap();
        assert!(p.states().last().unwrap().iter().all(|q| q.is_finite()));
        eprintln!("N=1024, 1000 steps: {:?}", start.elapsed());
    }

    #[test]
    fn empirical_char_examples() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        let mut c = config(2, Noise::Off, InteractionKernel::zero());
        c.initial = InitialSampler::File(vec![KineticPoint::new(0.5, 0.2), KineticPoint::new(-0.5, -0.2)]);
        c.t_end = 0.0;
        let p = simulate(&c).unwrap();
        let f = empirical_char(&p, 0, &g).unwrap();
        assert!(f.values().iter().all(|z| z.im.abs() < 1e-13));
        assert!((f.at_origin().re - 1.0).abs() < 1e-14);
        assert!(empirical_char(&p, 3, &g).is_err());
    }
}
