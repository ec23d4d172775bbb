use crate::error::{Error, Result};
use crate::particles::GaussianMixture;
use crate::semigroup::{CharSource, PhysicalField, PhysicalGrid};
use crate::spectral::{FrequencyGrid, SpectralField};
use crate::C64;
use std::sync::Arc;

/// Tolerance on the total mass of a density.
pub const MASS_TOLERANCE: f64 = 1e-8;

/// Fraction of each half-width forming the boundary frame watched by the
/// truncation monitor.
pub const BOUNDARY_FRAME: f64 = 0.1;

/// A probability density sampled on a periodic [`PhysicalGrid`] at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityField {
    field: PhysicalField,
    t: f64,
}

impl DensityField {
    /// Wraps a field after checking finiteness and unit mass.
    pub fn new(field: PhysicalField, t: f64) -> Result<Self> {
        if !field.is_finite() {
            return Err(Error::Numerical("non-finite density".into()));
        }
        let mass = field.integral();
        if (mass - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::invalid(format!("density mass {mass} differs from 1")));
        }
        Ok(DensityField { field, t })
    }

    /// Unchecked wrapper used inside the time loop, where mass is conserved
    /// by construction and verified by the caller.
    pub(crate) fn raw(field: PhysicalField, t: f64) -> Self {
        DensityField { field, t }
    }

    /// Samples a Gaussian mixture at the grid nodes.
    pub fn from_mixture(grid: PhysicalGrid, mixture: &GaussianMixture) -> Result<Self> {
        mixture.validate()?;
        Self::new(PhysicalField::from_fn(grid, |x, v| mixture.density(x, v)), 0.0)
    }

    pub fn field(&self) -> &PhysicalField {
        &self.field
    }

    pub fn grid(&self) -> PhysicalGrid {
        self.field.grid()
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mass(&self) -> f64 {
        self.field.integral()
    }

    /// Mass in the outer frame `|x| > 0.9 L_x` or `|v| > 0.9 L_v`.
    pub fn boundary_mass(&self) -> f64 {
        let g = self.grid();
        let (bx, bv) = ((1.0 - BOUNDARY_FRAME) * g.lx, (1.0 - BOUNDARY_FRAME) * g.lv);
        let mut acc = 0.0;
        for a in 0..g.nx {
            for b in 0..g.nv {
                if g.x(a).abs() > bx || g.v(b).abs() > bv {
                    acc += self.field.at(a, b).abs();
                }
            }
        }
        acc * g.cell()
    }

    /// `min(values) / max(values)` (negative when positivity is violated).
    pub fn min_relative(&self) -> f64 {
        let v = self.field.values();
        let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
        if max > 0.0 {
            min / max
        } else {
            min
        }
    }

    /// Characteristic function `∫ e^{i(ξx+ηv)} ν dx dv` on the frequency
    /// grid by direct quadrature over the cells (not the periodic
    /// transform).
    pub fn char_on(&self, grid: &Arc<FrequencyGrid>) -> SpectralField {
        field_char(&self.field, grid)
    }
}

pub(crate) fn field_char(f: &PhysicalField, grid: &Arc<FrequencyGrid>) -> SpectralField {
    f.transform(grid)
}

impl CharSource for DensityField {
    fn char_at(&self, xi: f64, eta: f64) -> C64 {
        let g = self.grid();
        let mut acc = C64::new(0.0, 0.0);
        let ev: Vec<C64> = (0..g.nv).map(|b| C64::from_polar(1.0, eta * g.v(b))).collect();
        for a in 0..g.nx {
            let row: C64 = (0..g.nv).map(|b| ev[b] * self.field.at(a, b)).sum();
            acc += row * C64::from_polar(1.0, xi * g.x(a));
        }
        acc * g.cell()
    }

    fn band(&self) -> Option<(f64, f64)> {
        let g = self.grid();
        Some((g.kx_max(), g.kv_max()))
    }
}
