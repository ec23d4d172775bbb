use crate::error::{Error, Result};
use crate::semigroup::CharSource;
use crate::spectral::KineticPoint;
use crate::C64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use std::f64::consts::{PI, SQRT_2};

/// One bivariate normal component of a [`GaussianMixture`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub weight: f64,
    pub mean_x: f64,
    pub mean_v: f64,
    pub std_x: f64,
    pub std_v: f64,
    /// Correlation between `x` and `v`.
    #[serde(default)]
    pub rho: f64,
}

/// A finite mixture of bivariate normals, the smooth initial law of the
/// experiments.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixture {
    pub components: Vec<GaussianComponent>,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / SQRT_2)
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

impl GaussianMixture {
    pub fn new(components: Vec<GaussianComponent>) -> Result<Self> {
        let m = GaussianMixture { components };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::invalid("mixture needs at least one component"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("mixture weights sum to {total}")));
        }
        for c in &self.components {
            let finite = [c.weight, c.mean_x, c.mean_v, c.std_x, c.std_v, c.rho].iter().all(|v| v.is_finite());
            if !finite || c.weight < 0.0 || c.std_x <= 0.0 || c.std_v <= 0.0 || c.rho.abs() >= 1.0 {
                return Err(Error::invalid(format!("invalid mixture component {c:?}")));
            }
        }
        Ok(())
    }

    /// The default initial law: an asymmetric two-bump mixture.
    pub fn default_initial() -> Self {
        GaussianMixture {
            components: vec![
                GaussianComponent { weight: 0.6, mean_x: -1.0, mean_v: 0.5, std_x: 0.6, std_v: 0.5, rho: 0.0 },
                GaussianComponent { weight: 0.4, mean_x: 1.2, mean_v: -0.4, std_x: 0.7, std_v: 0.6, rho: 0.3 },
            ],
        }
    }

    /// Single centered Gaussian with the given standard deviations.
    pub fn single(mean_x: f64, mean_v: f64, std_x: f64, std_v: f64) -> Self {
        GaussianMixture { components: vec![GaussianComponent { weight: 1.0, mean_x, mean_v, std_x, std_v, rho: 0.0 }] }
    }

    pub fn density(&self, x: f64, v: f64) -> f64 {
        self.components
            .iter()
            .map(|c| {
                let zx = (x - c.mean_x) / c.std_x;
                let zv = (v - c.mean_v) / c.std_v;
                let one = 1.0 - c.rho * c.rho;
                let q = (zx * zx - 2.0 * c.rho * zx * zv + zv * zv) / one;
                c.weight * (-0.5 * q).exp() / (2.0 * PI * c.std_x * c.std_v * one.sqrt())
            })
            .sum()
    }

    /// Exact draw.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> KineticPoint {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut comp = self.components.last().unwrap();
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                comp = c;
                break;
            }
        }
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let x = comp.mean_x + comp.std_x * z1;
        let v = comp.mean_v + comp.std_v * (comp.rho * z1 + (1.0 - comp.rho * comp.rho).sqrt() * z2);
        KineticPoint::new(x, v)
    }

    fn marginal_cdf_x(&self, x: f64) -> f64 {
        self.components.iter().map(|c| c.weight * std_normal_cdf((x - c.mean_x) / c.std_x)).sum()
    }

    fn conditional_cdf_v(&self, x: f64, v: f64) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for c in &self.components {
            let zx = (x - c.mean_x) / c.std_x;
            let w = c.weight * std_normal_pdf(zx) / c.std_x;
            let m = c.mean_v + c.rho * c.std_v * zx;
            let s = c.std_v * (1.0 - c.rho * c.rho).sqrt();
            num += w * std_normal_cdf((v - m) / s);
            den += w;
        }
        if den > 0.0 {
            num / den
        } else {
            // far tails: fall back to the widest component's conditional
            0.5
        }
    }

    fn bracket(&self) -> (f64, f64, f64, f64) {
        let mut b = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for c in &self.components {
            b.0 = b.0.min(c.mean_x - 40.0 * c.std_x);
            b.1 = b.1.max(c.mean_x + 40.0 * c.std_x);
            let spread = 40.0 * c.std_v + (c.rho * c.std_v) * 40.0;
            b.2 = b.2.min(c.mean_v - spread - 40.0 * c.std_v);
            b.3 = b.3.max(c.mean_v + spread + 40.0 * c.std_v);
        }
        b
    }

    /// Rosenblatt map of the unit square onto the mixture: marginal
    /// quantile in `x`, then conditional quantile of `v` given `x`.
    pub fn rosenblatt(&self, u1: f64, u2: f64) -> KineticPoint {
        let (x0, x1, v0, v1) = self.bracket();
        let x = bisect(|x| self.marginal_cdf_x(x) - u1, x0, x1);
        let v = bisect(|v| self.conditional_cdf_v(x, v) - u2, v0, v1);
        KineticPoint::new(x, v)
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * (1.0 + mid.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

impl CharSource for GaussianMixture {
    fn char_at(&self, xi: f64, eta: f64) -> C64 {
        self.components
            .iter()
            .map(|c| {
                let q = xi * xi * c.std_x * c.std_x + 2.0 * c.rho * c.std_x * c.std_v * xi * eta + eta * eta * c.std_v * c.std_v;
                C64::from_polar(c.weight * (-0.5 * q).exp(), xi * c.mean_x + eta * c.mean_v)
            })
            .sum()
    }
}

/// Generator of the rank-1 Korobov lattice with `n` points: the integer
/// nearest to `n/φ` that is coprime to `n`.
pub fn korobov_generator(n: usize) -> usize {
    if n <= 2 {
        return 1;
    }
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let target = (n as f64 / phi).round() as i64;
    let gcd = |mut a: usize, mut b: usize| {
        while b != 0 {
            (a, b) = (b, a % b);
        }
        a
    };
    for off in 0..n as i64 {
        for cand in [target - off, target + off] {
            if cand >= 1 && (cand as usize) < n && gcd(cand as usize, n) == 1 {
                return cand as usize;
            }
        }
    }
    1
}

/// How the `N` initial particles are produced.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialSampler {
    /// Independent exact draws from the mixture.
    Iid(GaussianMixture),
    /// Deterministic rank-1 lattice in the unit square mapped through the
    /// mixture's Rosenblatt transform, optionally with one common uniform
    /// random shift (modulo 1) shared by all points.
    Lattice { mixture: GaussianMixture, shift: bool },
    /// Explicit points; the count must match `N`.
    File(Vec<KineticPoint>),
}

impl InitialSampler {
    /// The mixture behind the sampler, if any.
    pub fn mixture(&self) -> Option<&GaussianMixture> {
        match self {
            InitialSampler::Iid(m) | InitialSampler::Lattice { mixture: m, .. } => Some(m),
            InitialSampler::File(_) => None,
        }
    }

    /// Produces exactly `n` points.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<KineticPoint>> {
        if n == 0 {
            return Err(Error::invalid("particle count must be ≥ 1"));
        }
        match self {
            InitialSampler::Iid(m) => {
                m.validate()?;
                Ok((0..n).map(|_| m.sample(rng)).collect())
            }
            InitialSampler::Lattice { mixture, shift } => {
                mixture.validate()?;
                let g = korobov_generator(n);
                let (s1, s2) = if *shift { (rng.random::<f64>(), rng.random::<f64>()) } else { (0.0, 0.0) };
                let half = 0.5 / n as f64;
                Ok((0..n)
                    .map(|i| {
                        let u1 = (i as f64 / n as f64 + half + s1).fract();
                        let u2 = (((i * g) % n) as f64 / n as f64 + half + s2).fract();
                        mixture.rosenblatt(u1.max(f64::EPSILON), u2.max(f64::EPSILON))
                    })
                    .collect())
            }
            InitialSampler::File(points) => {
                if points.len() != n {
                    return Err(Error::invalid(format!("initial-condition file holds {} points, expected {n}", points.len())));
                }
                if points.iter().any(|p| !p.is_finite()) {
                    return Err(Error::invalid("non-finite point in initial-condition file"));
                }
                Ok(points.clone())
            }
        }
    }
}
