use crate::error::{Error, Result};
use crate::particles::{GaussianMixture, InitialSampler, InteractionKernel};
use crate::semigroup::{Noise, PhysicalGrid};
use crate::spectral::{FrequencyGrid, SobolevOrder};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::sync::Arc;

/// Which study a configuration describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    #[default]
    Lln,
    Zdecay,
    MildResidual,
    SemigroupVerify,
    SolverVerify,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Lln => "lln",
            Experiment::Zdecay => "zdecay",
            Experiment::MildResidual => "mild-residual",
            Experiment::SemigroupVerify => "semigroup-verify",
            Experiment::SolverVerify => "solver-verify",
        }
    }
}

/// Built-in interaction kernels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum KernelConfig {
    /// `γ = −K sin(Δx)`.
    Kuramoto {
        strength: f64,
    },
    /// `γ = β e^{−Δx²} Δv / (1 + Δv²)`.
    Alignment {
        beta: f64,
    },
    Zero,
}

impl KernelConfig {
    pub fn build(&self) -> Result<InteractionKernel> {
        let ok = |v: f64| if v.is_finite() { Ok(()) } else { Err(Error::Config("kernel parameter must be finite".into())) };
        Ok(match *self {
            KernelConfig::Kuramoto { strength } => {
                ok(strength)?;
                InteractionKernel::kuramoto(strength)
            }
            KernelConfig::Alignment { beta } => {
                ok(beta)?;
                InteractionKernel::alignment(beta)
            }
            KernelConfig::Zero => InteractionKernel::zero(),
        })
    }
}

/// Initial particle sampler.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Independent draws from the initial mixture.
    #[default]
    Iid,
    /// Rank-1 lattice with one common random shift per replica.
    Lattice,
}

/// The model shared by particles and solver.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub t_end: f64,
    pub noise: Noise,
    pub kernel: KernelConfig,
    pub initial: GaussianMixture,
}

/// Particle-system settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParticleConfig {
    pub dt: f64,
    pub n_ladder: Vec<usize>,
    pub replicas: usize,
    pub sampler: SamplerKind,
    /// Number of snapshot times, equally spaced on `[0, T]` (both ends
    /// included).
    pub snapshots: usize,
}

/// Reference-solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    /// Must be an integer multiple of the particle step.
    pub dt: f64,
    pub lx: f64,
    pub lv: f64,
    pub nx: usize,
    pub nv: usize,
    pub boundary_tol: f64,
    /// The solver's self-convergence estimate must stay below this fraction
    /// of the expected Monte Carlo error at the largest `N`.
    pub bias_fraction: f64,
}

/// Frequency-grid settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrequencyConfig {
    pub xi_max: f64,
    pub eta_max: f64,
    pub n_xi: usize,
    pub n_eta: usize,
}

impl FrequencyConfig {
    pub fn build(&self) -> Result<Arc<FrequencyGrid>> {
        FrequencyGrid::new(self.xi_max, self.eta_max, self.n_xi, self.n_eta)
    }
}

/// Settings of the mild-identity discretization study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResidualConfig {
    pub n: usize,
    /// Step sizes, each half of the previous one.
    pub dts: Vec<f64>,
}

/// A complete experiment description. Every field has a default that
/// depends on `experiment`; a configuration file only lists overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Sobolev order `s` of the dual norm.
    pub sobolev_s: f64,
    pub model: ModelConfig,
    pub particles: ParticleConfig,
    pub solver: SolverConfig,
    pub frequency: FrequencyConfig,
    pub residual: ResidualConfig,
}

impl ExperimentConfig {
    /// Defaults of the given experiment.
    pub fn defaults(experiment: Experiment) -> Self {
        let mut c = ExperimentConfig {
            experiment,
            seed: 20_240_601,
            output_dir: PathBuf::from("out"),
            sobolev_s: 6.0,
            model: ModelConfig {
                t_end: 1.0,
                noise: Noise::Kinetic,
                kernel: KernelConfig::Kuramoto { strength: 0.5 },
                initial: GaussianMixture::default_initial(),
            },
            particles: ParticleConfig {
                dt: 2e-3,
                n_ladder: vec![64, 128, 256, 512, 1024, 2048, 4096],
                replicas: 20,
                sampler: SamplerKind::Iid,
                snapshots: 33,
            },
            solver: SolverConfig {
                dt: 1e-2,
                lx: 4.0 * std::f64::consts::PI,
                lv: 4.0 * std::f64::consts::PI,
                nx: 256,
                nv: 256,
                boundary_tol: 1e-8,
                bias_fraction: 0.1,
            },
            frequency: FrequencyConfig { xi_max: 32.0, eta_max: 32.0, n_xi: 257, n_eta: 257 },
            residual: ResidualConfig { n: 8, dts: vec![4e-3, 2e-3, 1e-3] },
        };
        if experiment == Experiment::Zdecay {
            c.particles.dt = 1.0 / 64.0;
            c.solver.dt = 1.0 / 64.0;
            c.particles.n_ladder = vec![64, 256, 1024, 4096];
            c.frequency = FrequencyConfig { xi_max: 16.0, eta_max: 16.0, n_xi: 65, n_eta: 65 };
        }
        c
    }

    /// Parses a TOML document; keys absent from it keep the defaults of the
    /// experiment named in it (`lln` when none is named).
    pub fn from_toml(text: &str) -> Result<Self> {
        let user: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let experiment = match user.get("experiment") {
            Some(v) => v.clone().try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?,
            None => Experiment::Lln,
        };
        let mut base = toml::Table::try_from(Self::defaults(experiment)).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, user);
        let cfg: ExperimentConfig = toml::Value::Table(base).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a configuration file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML rendering (used for hashing and for saving).
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// SHA-256 of the canonical rendering, with the output directory left
    /// out (it does not influence any result).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        Sha256::digest(c.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let p = &self.particles;
        if p.n_ladder.is_empty() || p.n_ladder.windows(2).any(|w| w[1] <= w[0]) || p.n_ladder[0] == 0 {
            return bad("particles.n_ladder must be non-empty, positive and strictly increasing");
        }
        if p.replicas == 0 {
            return bad("particles.replicas must be ≥ 1");
        }
        if p.snapshots < 2 {
            return bad("particles.snapshots must be ≥ 2");
        }
        let t = self.model.t_end;
        if !(t.is_finite() && t > 0.0) {
            return bad("model.t_end must be positive");
        }
        self.model.initial.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.model.kernel.build()?;
        let order = self.order()?;
        match self.experiment {
            Experiment::Lln => order.require_lln(),
            _ => order.require_dual(),
        }
        .map_err(|e| Error::Config(e.to_string()))?;
        let m = self.particle_steps()?;
        if m < p.snapshots - 1 {
            return bad("fewer particle steps than snapshot intervals");
        }
        let stride = self.solver_stride()?;
        if m / stride < p.snapshots - 1 {
            return bad("fewer solver steps than snapshot intervals");
        }
        let s = &self.solver;
        if !(s.boundary_tol > 0.0 && s.bias_fraction > 0.0) {
            return bad("solver tolerances must be positive");
        }
        self.physical_grid()?;
        self.frequency.build().map_err(|e| Error::Config(e.to_string()))?;
        let r = &self.residual;
        if r.n == 0 || r.dts.is_empty() || r.dts.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return bad("residual.n and residual.dts must be positive");
        }
        Ok(())
    }

    pub fn order(&self) -> Result<SobolevOrder> {
        SobolevOrder::new(self.sobolev_s, 1).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn physical_grid(&self) -> Result<PhysicalGrid> {
        let s = &self.solver;
        PhysicalGrid::new(s.lx, s.lv, s.nx, s.nv).map_err(|e| Error::Config(e.to_string()))
    }

    /// `M = T / dt` for the particle system.
    pub fn particle_steps(&self) -> Result<usize> {
        integer_ratio(self.model.t_end, self.particles.dt).ok_or_else(|| Error::Config("T / particles.dt must be an integer".into()))
    }

    /// Number of particle steps per solver step.
    pub fn solver_stride(&self) -> Result<usize> {
        integer_ratio(self.solver.dt, self.particles.dt)
            .filter(|&k| k >= 1)
            .ok_or_else(|| Error::Config("solver.dt must be an integer multiple of particles.dt".into()))
    }

    /// Snapshot particle steps `stride · round(k (M/stride) / (S−1))`,
    /// `k = 0..S`, so that every snapshot is also a solver time.
    pub fn snapshot_steps(&self) -> Result<Vec<usize>> {
        let m = self.particle_steps()?;
        let stride = self.solver_stride()?;
        let coarse = m / stride;
        let s = self.particles.snapshots - 1;
        Ok((0..=s).map(|k| stride * ((k * coarse) as f64 / s as f64).round() as usize).collect())
    }

    pub fn initial_sampler(&self) -> InitialSampler {
        let m = self.model.initial.clone();
        match self.particles.sampler {
            SamplerKind::Iid => InitialSampler::Iid(m),
            SamplerKind::Lattice => InitialSampler::Lattice { mixture: m, shift: true },
        }
    }
}

fn integer_ratio(a: f64, b: f64) -> Option<usize> {
    if !(a.is_finite() && b.is_finite() && b > 0.0 && a >= 0.0) {
        return None;
    }
    let r = a / b;
    let k = r.round();
    ((r - k).abs() <= 1e-9 * r.max(1.0)).then_some(k as usize)
}

fn merge(base: &mut toml::Table, user: toml::Table) {
    for (k, v) in user {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(u)) if k != "kernel" => merge(b, u),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}
