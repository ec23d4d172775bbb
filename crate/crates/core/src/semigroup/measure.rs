use super::{noise_multiplier, Noise};
use crate::error::{Error, Result};
use crate::spectral::{FrequencyGrid, KineticPoint, SpectralField};
use crate::C64;
use std::sync::Arc;

/// A measure whose characteristic function `ν̂(ξ,η) = ∫ e^{i(ξx+ηv)} dν` can
/// be evaluated at arbitrary frequencies.
///
/// The forward semigroup reads `ν̂` at sheared frequencies `(ξ, η + tξ)`,
/// which generally fall between grid nodes, so it is driven by a source
/// rather than by grid samples.
pub trait CharSource {
    /// `ν̂(ξ, η)`.
    fn char_at(&self, xi: f64, eta: f64) -> C64;

    /// Frequency band `(|ξ| ≤ a, |η| ≤ b)` inside which `char_at` is
    /// reliable; `None` when unbounded.
    fn band(&self) -> Option<(f64, f64)> {
        None
    }
}

/// A discrete measure `Σ m_k δ_{p_k}`.
#[derive(Clone, Debug)]
pub struct DiscreteAtoms {
    pub points: Vec<KineticPoint>,
    pub masses: Vec<f64>,
}

impl DiscreteAtoms {
    pub fn new(points: Vec<KineticPoint>, masses: Vec<f64>) -> Result<Self> {
        if points.len() != masses.len() || points.is_empty() {
            return Err(Error::Mismatch("need matching, non-empty points and masses".into()));
        }
        Ok(DiscreteAtoms { points, masses })
    }

    /// Equal masses `1/N`.
    pub fn uniform(points: Vec<KineticPoint>) -> Result<Self> {
        let n = points.len();
        Self::new(points, vec![1.0 / n.max(1) as f64; n])
    }
}

impl CharSource for DiscreteAtoms {
    fn char_at(&self, xi: f64, eta: f64) -> C64 {
        self.points.iter().zip(&self.masses).map(|(p, m)| C64::from_polar(*m, xi * p.x + eta * p.v)).sum()
    }
}

/// Forward (Fokker–Planck) action on characteristic functions:
/// `ν̂_t(ξ,η) = G(t,ξ,η) · ν̂_0(ξ, η + tξ)` on every grid node.
///
/// Sources with a finite band are rejected when a node with non-negligible
/// multiplier reads `ν̂_0` outside the band.
pub fn apply_pt_measure(source: &dyn CharSource, t: f64, grid: &Arc<FrequencyGrid>, noise: Noise) -> Result<SpectralField> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::invalid(format!("time must be finite and ≥ 0, got {t}")));
    }
    let band = source.band();
    let mut values = Vec::with_capacity(grid.len());
    for &xi in grid.xi() {
        for &eta in grid.eta() {
            let m = noise_multiplier(noise, t, xi, eta);
            let shifted = eta + t * xi;
            if let Some((bx, bv)) = band {
                if (xi.abs() > bx || shifted.abs() > bv) && m > 1e-14 {
                    return Err(Error::invalid(format!("sheared frequency ({xi}, {shifted}) lies outside the source band ({bx}, {bv})")));
                }
            }
            values.push(if m == 0.0 { C64::new(0.0, 0.0) } else { source.char_at(xi, shifted) * m });
        }
    }
    SpectralField::from_values(grid, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::semigroup::{kernel_g, KineticGaussian};
    use crate::spectral::measure_char;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_at_zero_and_mass_conserved() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        let atoms = DiscreteAtoms::uniform(vec![KineticPoint::new(0.2, 1.0), KineticPoint::new(-1.0, 0.5)]).unwrap();
        let direct = measure_char(&atoms.points, &atoms.masses, &g).unwrap();
        let same = apply_pt_measure(&atoms, 0.0, &g, Noise::Kinetic).unwrap();
        for (a, b) in direct.values().iter().zip(same.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let later = apply_pt_measure(&atoms, 0.9, &g, Noise::Kinetic).unwrap();
        assert!((later.at_origin() - C64::new(1.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn single_particle_matches_simulated_pushforward() {
        let g = FrequencyGrid::new(2.0, 2.0, 9, 9).unwrap();
        let (x, v, t) = (0.3, -0.8, 0.7);
        let atoms = DiscreteAtoms::uniform(vec![KineticPoint::new(x, v)]).unwrap();
        let exact = apply_pt_measure(&atoms, t, &g, Noise::Kinetic).unwrap();
        let law = KineticGaussian::new(t).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let pts: Vec<KineticPoint> = (0..n)
            .map(|_| {
                let (dx, dv) = law.sample(&mut rng);
                KineticPoint::new(x + t * v + dx, v + dv)
            })
            .collect();
        let emp = measure_char(&pts, &vec![1.0 / n as f64; n], &g).unwrap();
        for (j, &xi) in g.xi().iter().enumerate() {
            for (k, &eta) in g.eta().iter().enumerate() {
                let want = C64::from_polar(1.0, xi * (x + t * v) + eta * v) * kernel_g(t, xi, eta);
                assert!((exact.at(j, k) - want).norm() < 1e-13);
                // per-component standard error is at most (1/(2n))^{1/2}
                let se = (0.5 / n as f64).sqrt();
                assert!((emp.at(j, k) - want).norm() < 4.5 * se, "({xi},{eta})");
            }
        }
    }

    struct Banded;
    impl CharSource for Banded {
        fn char_at(&self, _: f64, _: f64) -> C64 {
            C64::new(1.0, 0.0)
        }
        fn band(&self) -> Option<(f64, f64)> {
            Some((4.0, 4.0))
        }
    }

    #[test]
    fn out_of_band_reads_are_rejected() {
        let g = FrequencyGrid::new(4.0, 4.0, 17, 17).unwrap();
        assert!(apply_pt_measure(&Banded, 0.5, &g, Noise::Off).is_err());
        assert!(apply_pt_measure(&Banded, 0.0, &g, Noise::Off).is_ok());
    }
}
