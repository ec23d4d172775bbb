use super::quadrature::{cusp_product_weights, trapezoid_weights};
use super::{sobolev_weight_1d, KineticPoint};
use crate::error::{Error, Result};
use crate::linalg::{cgemm_tn_acc, CMat};
use crate::C64;
use std::sync::{Arc, Mutex};

/// Uniform tensor grid on the truncated frequency box
/// `[-Ξ_max, Ξ_max] × [-H_max, H_max]` (one velocity and one position
/// dimension).
///
/// Two families of quadrature weights live on the grid:
/// plain trapezoid (Lebesgue) weights, which sum to the box area, and
/// Sobolev product-integration weights for `∫ w_s(ξ,η) g(ξ,η)` with smooth
/// `g`, cached per order `s`.
#[derive(Debug)]
pub struct FrequencyGrid {
    xi: Vec<f64>,
    eta: Vec<f64>,
    xi_max: f64,
    eta_max: f64,
    sobolev_cache: Mutex<Vec<(u64, Arc<Vec<f64>>)>>,
}

fn axis(max: f64, n: usize) -> Vec<f64> {
    let h = 2.0 * max / (n - 1) as f64;
    let mid = (n / 2) as isize;
    (0..n).map(|j| (j as isize - mid) as f64 * h).collect()
}

impl FrequencyGrid {
    /// A symmetric grid with `n_xi × n_eta` nodes; both counts must be odd
    /// (so that zero is a node) and at least 5.
    pub fn new(xi_max: f64, eta_max: f64, n_xi: usize, n_eta: usize) -> Result<Arc<Self>> {
        for (name, m, n) in [("xi", xi_max, n_xi), ("eta", eta_max, n_eta)] {
            if !(m.is_finite() && m > 0.0) {
                return Err(Error::invalid(format!("{name} cutoff must be positive, got {m}")));
            }
            if n < 5 || n % 2 == 0 {
                return Err(Error::invalid(format!("{name} node count must be odd and ≥ 5, got {n}")));
            }
        }
        Ok(Arc::new(FrequencyGrid {
            xi: axis(xi_max, n_xi),
            eta: axis(eta_max, n_eta),
            xi_max,
            eta_max,
            sobolev_cache: Mutex::new(Vec::new()),
        }))
    }

    /// The default grid: 257² nodes on `[-32, 32]²`.
    pub fn default_grid() -> Arc<Self> {
        Self::new(32.0, 32.0, 257, 257).expect("default grid is valid")
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn n_xi(&self) -> usize {
        self.xi.len()
    }

    pub fn n_eta(&self) -> usize {
        self.eta.len()
    }

    pub fn len(&self) -> usize {
        self.xi.len() * self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cutoffs(&self) -> (f64, f64) {
        (self.xi_max, self.eta_max)
    }

    pub fn spacing(&self) -> (f64, f64) {
        (self.xi[1] - self.xi[0], self.eta[1] - self.eta[0])
    }

    /// Flat index of node `(ξ_j, η_k)`.
    #[inline]
    pub fn index(&self, j: usize, k: usize) -> usize {
        j * self.eta.len() + k
    }

    /// Index of the origin node.
    pub fn origin(&self) -> usize {
        self.index(self.n_xi() / 2, self.n_eta() / 2)
    }

    /// True when both grids have identical nodes.
    pub fn same_nodes(&self, other: &FrequencyGrid) -> bool {
        self.xi_max == other.xi_max && self.eta_max == other.eta_max && self.xi.len() == other.xi.len() && self.eta.len() == other.eta.len()
    }

    /// Trapezoid weights; they sum to the box area `4 Ξ_max H_max`.
    pub fn lebesgue_weights(&self) -> Vec<f64> {
        let (hx, he) = self.spacing();
        let wx = trapezoid_weights(hx, self.n_xi());
        let we = trapezoid_weights(he, self.n_eta());
        let mut out = Vec::with_capacity(self.len());
        for a in &wx {
            for b in &we {
                out.push(a * b);
            }
        }
        out
    }

    /// Product-integration weights `W_jk ≈ ∫ w_s(ξ,η) L_jk(ξ,η)` for the
    /// Sobolev weight of order `s` (negative `s` for dual norms).
    pub fn sobolev_weights(&self, s: f64) -> Arc<Vec<f64>> {
        let key = s.to_bits();
        if let Some((_, w)) = self.sobolev_cache.lock().unwrap().iter().find(|(k, _)| *k == key) {
            return w.clone();
        }
        let w = Arc::new(self.compute_sobolev_weights(s));
        let mut cache = self.sobolev_cache.lock().unwrap();
        if !cache.iter().any(|(k, _)| *k == key) {
            cache.push((key, w.clone()));
        }
        w
    }

    fn compute_sobolev_weights(&self, s: f64) -> Vec<f64> {
        let (hx, he) = self.spacing();
        let tau = trapezoid_weights(he, self.n_eta());
        let (nx, ne) = (self.n_xi(), self.n_eta());
        let mut out = vec![0.0; nx * ne];
        for k in 0..ne {
            let eta = self.eta[k];
            let line = cusp_product_weights(self.xi[0], hx, nx, |xi| sobolev_weight_1d(xi, eta, s));
            for j in 0..nx {
                out[j * ne + k] = tau[k] * line[j];
            }
        }
        out
    }
}

/// Complex values on the nodes of a [`FrequencyGrid`], stored `ξ`-major.
#[derive(Clone, Debug)]
pub struct SpectralField {
    grid: Arc<FrequencyGrid>,
    values: Vec<C64>,
}

impl SpectralField {
    pub fn zeros(grid: &Arc<FrequencyGrid>) -> Self {
        SpectralField { grid: grid.clone(), values: vec![C64::new(0.0, 0.0); grid.len()] }
    }

    /// Samples `f(ξ, η)` at every node.
    pub fn from_fn(grid: &Arc<FrequencyGrid>, f: impl Fn(f64, f64) -> C64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for &xi in grid.xi() {
            for &eta in grid.eta() {
                values.push(f(xi, eta));
            }
        }
        SpectralField { grid: grid.clone(), values }
    }

    pub fn from_values(grid: &Arc<FrequencyGrid>, values: Vec<C64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Mismatch(format!("{} values for a grid of {} nodes", values.len(), grid.len())));
        }
        Ok(SpectralField { grid: grid.clone(), values })
    }

    pub fn grid(&self) -> &Arc<FrequencyGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn at(&self, j: usize, k: usize) -> C64 {
        self.values[self.grid.index(j, k)]
    }

    /// Value at the origin node `(0, 0)`.
    pub fn at_origin(&self) -> C64 {
        self.values[self.grid.origin()]
    }

    fn check_same(&self, other: &SpectralField) -> Result<()> {
        if Arc::ptr_eq(&self.grid, &other.grid) || self.grid.same_nodes(&other.grid) {
            Ok(())
        } else {
            Err(Error::Mismatch("spectral fields live on different grids".into()))
        }
    }

    /// `self − other`.
    pub fn sub(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(SpectralField { grid: self.grid.clone(), values })
    }

    /// `self + other`.
    pub fn add(&self, other: &SpectralField) -> Result<SpectralField> {
        self.check_same(other)?;
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(SpectralField { grid: self.grid.clone(), values })
    }

    /// `c · self`.
    pub fn scale(&self, c: f64) -> SpectralField {
        SpectralField { grid: self.grid.clone(), values: self.values.iter().map(|a| a * c).collect() }
    }

    /// Largest `|values(−ξ,−η) − conj(values(ξ,η))|` over the grid.
    pub fn conjugate_symmetry_defect(&self) -> f64 {
        let (nx, ne) = (self.grid.n_xi(), self.grid.n_eta());
        let mut worst: f64 = 0.0;
        for j in 0..nx {
            for k in 0..ne {
                let a = self.at(j, k);
                let b = self.at(nx - 1 - j, ne - 1 - k);
                worst = worst.max((a - b.conj()).norm());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(xs: &[f64]) -> f64 {
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            c += (sum - t) + x;
        } else {
            c += (x - t) + sum;
        }
        sum = t;
    }
    sum + c
}

const CHAR_CHUNK: usize = 8192;

/// Characteristic function `Σ_k m_k exp(i(ξ x_k + η v_k))` of a discrete
/// probability measure, sampled on the grid.
pub fn measure_char(points: &[KineticPoint], masses: &[f64], grid: &Arc<FrequencyGrid>) -> Result<SpectralField> {
    if points.is_empty() {
        return Err(Error::invalid("empty point list"));
    }
    if points.len() != masses.len() {
        return Err(Error::Mismatch(format!("{} points but {} masses", points.len(), masses.len())));
    }
    if masses.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
        return Err(Error::invalid("masses must be finite and nonnegative"));
    }
    let total = compensated_sum(masses);
    if (total - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(format!("masses sum to {total}, not 1")));
    }
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("non-finite phase-space point"));
    }
    Ok(weighted_char(points, masses, grid))
}

/// Characteristic function of the empirical measure with equal masses `1/N`.
pub(crate) fn grid_uniform_char(points: &[KineticPoint], grid: &Arc<FrequencyGrid>) -> SpectralField {
    let m = 1.0 / points.len() as f64;
    weighted_char(points, &vec![m; points.len()], grid)
}

/// `Σ_k c_k exp(i(ξ x_k + η v_k))` for real coefficients (no normalization
/// checks); uses conjugate symmetry to evaluate only the `η ≥ 0` half.
pub(crate) fn weighted_char(points: &[KineticPoint], coef: &[f64], grid: &Arc<FrequencyGrid>) -> SpectralField {
    let (nx, ne) = (grid.n_xi(), grid.n_eta());
    let (hx, he) = grid.spacing();
    let mid = ne / 2;
    let half = mid + 1;
    let mut acc = CMat::zeros(nx, half);
    for chunk in (0..points.len()).collect::<Vec<_>>().chunks(CHAR_CHUNK) {
        let mut at = CMat::zeros(chunk.len(), nx);
        let mut b = CMat::zeros(chunk.len(), half);
        for (r, &p) in chunk.iter().enumerate() {
            at.fill_exp_row(r, (coef[p], 0.0), grid.xi()[0], hx, points[p].x);
            b.fill_exp_row(r, (1.0, 0.0), 0.0, he, points[p].v);
        }
        cgemm_tn_acc(&at, &b, &mut acc);
    }
    let mut values = vec![C64::new(0.0, 0.0); nx * ne];
    for j in 0..nx {
        for q in 0..half {
            let z = C64::new(acc.re[[j, q]], acc.im[[j, q]]);
            values[j * ne + mid + q] = z;
            values[(nx - 1 - j) * ne + mid - q] = z.conj();
        }
    }
    SpectralField { grid: grid.clone(), values }
}
