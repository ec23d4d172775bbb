use crate::error::{Error, Result};
use crate::spectral::KineticPoint;
use rayon::prelude::*;
use std::fmt;
use std::sync::Arc;

/// Closed-form structure that admits a fast mean-field evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FourierForm {
    /// `γ(Δx, Δv) = −K sin(Δx)`: the mean field only needs the first
    /// Fourier mode of the position marginal.
    SineMode { amplitude: f64 },
    /// `γ ≡ 0`.
    Zero,
}

#[derive(Clone)]
enum Shape {
    Kuramoto { k: f64 },
    Alignment { beta: f64 },
    Zero,
    Custom(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>),
}

/// Translation-invariant interaction `γ(Δx, Δv)` with its sup bound and
/// Lipschitz constant.
#[derive(Clone)]
pub struct InteractionKernel {
    name: String,
    bound: f64,
    lipschitz: f64,
    shape: Shape,
}

impl fmt::Debug for InteractionKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InteractionKernel")
            .field("name", &self.name)
            .field("bound", &self.bound)
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

impl InteractionKernel {
    /// Kuramoto-type `γ = −K sin(Δx)`; bound and Lipschitz constant `|K|`.
    pub fn kuramoto(k: f64) -> Self {
        InteractionKernel { name: format!("kuramoto(K={k})"), bound: k.abs(), lipschitz: k.abs(), shape: Shape::Kuramoto { k } }
    }

    /// Bounded alignment `γ = β exp(−Δx²) Δv/(1+Δv²)`.
    ///
    /// `|γ| ≤ |β|/2`; the gradient satisfies `|∂_Δx γ| ≤ |β|(2/e)^{1/2}/2`
    /// and `|∂_Δv γ| ≤ |β|`, giving the Lipschitz constant
    /// `|β|(1 + 1/(2e))^{1/2}`.
    pub fn alignment(beta: f64) -> Self {
        InteractionKernel {
            name: format!("alignment(beta={beta})"),
            bound: 0.5 * beta.abs(),
            lipschitz: beta.abs() * (1.0 + 0.5 / std::f64::consts::E).sqrt(),
            shape: Shape::Alignment { beta },
        }
    }

    /// No interaction.
    pub fn zero() -> Self {
        InteractionKernel { name: "zero".into(), bound: 0.0, lipschitz: 0.0, shape: Shape::Zero }
    }

    /// A user-supplied kernel with declared metadata.
    pub fn custom(name: impl Into<String>, bound: f64, lipschitz: f64, gamma: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        InteractionKernel { name: name.into(), bound, lipschitz, shape: Shape::Custom(Arc::new(gamma)) }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn fourier_form(&self) -> Option<FourierForm> {
        match self.shape {
            Shape::Kuramoto { k } => Some(FourierForm::SineMode { amplitude: k }),
            Shape::Zero => Some(FourierForm::Zero),
            _ => None,
        }
    }

    /// Whether `γ` ignores `Δv`.
    pub fn velocity_independent(&self) -> bool {
        matches!(self.shape, Shape::Kuramoto { .. } | Shape::Zero)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.shape, Shape::Zero)
    }

    /// `γ(Δx, Δv)`.
    #[inline]
    pub fn eval(&self, dx: f64, dv: f64) -> f64 {
        match &self.shape {
            Shape::Kuramoto { k } => -k * dx.sin(),
            Shape::Alignment { beta } => beta * (-dx * dx).exp() * dv / (1.0 + dv * dv),
            Shape::Zero => 0.0,
            Shape::Custom(f) => f(dx, dv),
        }
    }
}

fn check_state(state: &[KineticPoint]) -> Result<()> {
    if let Some(i) = state.iter().position(|p| !p.is_finite()) {
        return Err(Error::Numerical(format!("particle {i} has a non-finite state")));
    }
    Ok(())
}

/// `(1/N) Σ_{j≠i} γ(x_i − x_j, v_i − v_j)` by direct summation.
pub fn drift_pairwise(state: &[KineticPoint], kernel: &InteractionKernel) -> Result<Vec<f64>> {
    check_state(state)?;
    let n = state.len() as f64;
    Ok(state
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let mut acc = 0.0;
            for (j, q) in state.iter().enumerate() {
                if j != i {
                    acc += kernel.eval(p.x - q.x, p.v - q.v);
                }
            }
            acc / n
        })
        .collect())
}

/// Closed-form drift for kernels with a [`FourierForm`]; `None` otherwise.
pub fn drift_fast(state: &[KineticPoint], kernel: &InteractionKernel) -> Option<Result<Vec<f64>>> {
    let form = kernel.fourier_form()?;
    Some(check_state(state).map(|_| match form {
        FourierForm::Zero => vec![0.0; state.len()],
        FourierForm::SineMode { amplitude } => {
            let n = state.len() as f64;
            let (mut c, mut s) = (0.0, 0.0);
            for p in state {
                let (sn, cs) = p.x.sin_cos();
                c += cs;
                s += sn;
            }
            state
                .iter()
                .map(|p| {
                    let (sn, cs) = p.x.sin_cos();
                    -amplitude / n * (sn * c - cs * s)
                })
                .collect()
        }
    }))
}

/// Drift through the fast path when available, else by direct summation.
pub fn drift(state: &[KineticPoint], kernel: &InteractionKernel) -> Result<Vec<f64>> {
    match drift_fast(state, kernel) {
        Some(r) => r,
        None => drift_pairwise(state, kernel),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_state(n: usize, seed: u64) -> Vec<KineticPoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| KineticPoint::new(rng.random_range(-4.0..4.0), rng.random_range(-3.0..3.0))).collect()
    }

    #[test]
    fn single_particle_feels_nothing() {
        let s = [KineticPoint::new(0.3, 0.2)];
        assert_eq!(drift_pairwise(&s, &InteractionKernel::kuramoto(1.0)).unwrap(), vec![0.0]);
    }

    #[test]
    fn two_particle_hand_evaluation() {
        let s = [KineticPoint::new(std::f64::consts::FRAC_PI_2, 0.0), KineticPoint::new(0.0, 0.0)];
        let d = drift_pairwise(&s, &InteractionKernel::kuramoto(1.0)).unwrap();
        assert!((d[0] + 0.5).abs() < 1e-15 && (d[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn antisymmetric_kernels_have_zero_total_drift() {
        let s = random_state(200, 1);
        for k in [InteractionKernel::kuramoto(0.7), InteractionKernel::alignment(1.3)] {
            let total: f64 = drift_pairwise(&s, &k).unwrap().iter().sum();
            assert!(total.abs() < 1e-12, "{total}");
        }
    }

    #[test]
    fn fast_path_agrees_with_reference() {
        let s = random_state(500, 2);
        let k = InteractionKernel::kuramoto(0.5);
        let a = drift_pairwise(&s, &k).unwrap();
        let b = drift_fast(&s, &k).unwrap().unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10);
        }
        assert!(drift_fast(&s, &InteractionKernel::alignment(1.0)).is_none());
        assert!(drift(&s, &InteractionKernel::zero()).unwrap().iter().all(|d| *d == 0.0));
    }

    #[test]
    fn declared_bounds_and_lipschitz_constants_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [InteractionKernel::kuramoto(0.8), InteractionKernel::alignment(1.7)] {
            for _ in 0..20000 {
                let (a, b) = (rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0));
                let (c, d) = (a + rng.random_range(-0.5..0.5), b + rng.random_range(-0.5..0.5));
                assert!(k.eval(a, b).abs() <= k.bound() + 1e-15);
                let dist = ((a - c).powi(2) + (b - d).powi(2)).sqrt();
                if dist > 0.0 {
                    let ratio = (k.eval(a, b) - k.eval(c, d)).abs() / dist;
                    assert!(ratio <= 1.05 * k.lipschitz(), "{} ratio {ratio}", k.name());
                }
            }
        }
    }

    #[test]
    fn drift_is_bounded_and_rejects_non_finite_states() {
        let s = random_state(100, 4);
        let k = InteractionKernel::alignment(2.0);
        assert!(drift(&s, &k).unwrap().iter().all(|d| d.abs() <= k.bound()));
        let bad = [KineticPoint::new(f64::NAN, 0.0)];
        assert!(drift(&bad, &k).is_err());
        assert!(drift(&bad, &InteractionKernel::kuramoto(1.0)).is_err());
    }
}
