//! Spectral solver for the kinetic McKean–Vlasov equation
//! `∂_t ν + v·∇_x ν + div_v(ν (Γ*ν)) = Δ_v ν` in Duhamel (mild) form, and a
//! Picard fixed-point cross-check.

mod density;
mod picard;

pub(crate) use density::field_char;
pub use density::{DensityField, BOUNDARY_FRAME, MASS_TOLERANCE};
pub use picard::{picard_iterate, PicardRun, PicardStart};

use crate::error::{Error, Result};
use crate::fft::{linear_convolution_1d, linear_convolution_2d};
use crate::particles::{FourierForm, InteractionKernel};
use crate::semigroup::{apply_pt_density, Noise, PhysicalField};
use crate::spectral::{FrequencyGrid, SpectralField};
use std::io::Write;
use std::sync::Arc;

/// Runtime contracts of the time stepper.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverOptions {
    pub noise: Noise,
    /// Largest admissible mass in the boundary frame (fatal above).
    pub boundary_tol: f64,
    /// Relative negativity `min/max` below `−positivity_tol` is flagged.
    pub positivity_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { noise: Noise::Kinetic, boundary_tol: 1e-8, positivity_tol: 1e-8 }
    }
}

/// Mean-field force `(Γ*ν)(x,v) = ∫ γ(x−y, v−w) ν(y,w) dy dw` on the grid,
/// as a zero-padded (non-periodic) discrete convolution evaluated with
/// FFTs; velocity-independent kernels convolve the position marginal only.
pub fn meanfield_term(nu: &DensityField, kernel: &InteractionKernel) -> Result<PhysicalField> {
    let g = nu.grid();
    if kernel.is_zero() {
        return Ok(PhysicalField::zeros(g));
    }
    let vals = nu.field().values();
    if kernel.velocity_independent() {
        let rho: Vec<f64> = (0..g.nx).map(|a| vals[a * g.nv..(a + 1) * g.nv].iter().sum::<f64>() * g.dv()).collect();
        let dx = g.dx();
        let f = linear_convolution_1d(&rho, |p| kernel.eval(p as f64 * dx, 0.0) * dx);
        return PhysicalField::from_values(g, f.iter().flat_map(|&y| std::iter::repeat_n(y, g.nv)).collect());
    }
    let (dx, dv, cell) = (g.dx(), g.dv(), g.cell());
    let f = linear_convolution_2d(vals, g.nx, g.nv, |p, q| kernel.eval(p as f64 * dx, q as f64 * dv) * cell);
    PhysicalField::from_values(g, f)
}

/// Closed-form mean field of the sine kernel `γ = −K sin(Δx)`:
/// `−K[sin x ∫cos y ν − cos x ∫sin y ν]`.
pub fn meanfield_two_mode(nu: &DensityField, kernel: &InteractionKernel) -> Result<PhysicalField> {
    let Some(FourierForm::SineMode { amplitude }) = kernel.fourier_form() else {
        return Err(Error::invalid("two-mode evaluation needs the sine kernel"));
    };
    let g = nu.grid();
    let (mut c, mut s) = (0.0, 0.0);
    for a in 0..g.nx {
        let (sn, cs) = g.x(a).sin_cos();
        let row: f64 = (0..g.nv).map(|b| nu.field().at(a, b)).sum::<f64>() * g.cell();
        c += cs * row;
        s += sn * row;
    }
    Ok(PhysicalField::from_fn(g, |x, _| -amplitude * (x.sin() * c - x.cos() * s)))
}

/// `−∂_v(ν · (Γ*ν))` with a spectral velocity derivative.
fn nonlinearity(nu: &PhysicalField, kernel: &InteractionKernel) -> Result<PhysicalField> {
    let f = meanfield_term(&DensityField::raw(nu.clone(), 0.0), kernel)?;
    let flux: Vec<f64> = nu.values().iter().zip(f.values()).map(|(a, b)| -a * b).collect();
    Ok(PhysicalField::from_values(nu.grid(), flux)?.dv_spectral())
}

/// Per-step monitor readings.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepDiagnostics {
    pub min_relative: f64,
    pub boundary_mass: f64,
    pub positivity_violation: bool,
}

fn monitor(nu: &DensityField, opts: &SolverOptions) -> Result<StepDiagnostics> {
    if !nu.field().is_finite() {
        return Err(Error::Numerical(format!("density became non-finite at t={}", nu.t())));
    }
    let boundary_mass = nu.boundary_mass();
    if boundary_mass > opts.boundary_tol {
        return Err(Error::Numerical(format!(
            "boundary mass {boundary_mass:.3e} exceeds {:.1e} at t={}; enlarge the box",
            opts.boundary_tol,
            nu.t()
        )));
    }
    let min_relative = nu.min_relative();
    Ok(StepDiagnostics { min_relative, boundary_mass, positivity_violation: min_relative < -opts.positivity_tol })
}

/// One exponential-midpoint step of the forward Duhamel formula
/// `ν_{t+dt} = S_dt ν_t + ∫_0^dt S_{dt−r} N(ν_{t+r}) dr`, `N(ν) = −div_v(ν Γ*ν)`:
/// `ν_½ = S_{dt/2}(ν + (dt/2)N(ν))`, `ν' = S_dt ν + dt·S_{dt/2} N(ν_½)`.
pub fn step_mild(nu: &DensityField, dt: f64, kernel: &InteractionKernel, opts: &SolverOptions) -> Result<(DensityField, StepDiagnostics)> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::invalid(format!("step needs dt > 0, got {dt}")));
    }
    let f = nu.field();
    let free = apply_pt_density(f, dt, opts.noise)?;
    let next = if kernel.is_zero() {
        free
    } else {
        let n0 = nonlinearity(f, kernel)?;
        let half = apply_pt_density(&f.axpby(1.0, &n0, 0.5 * dt)?, 0.5 * dt, opts.noise)?;
        let n1 = nonlinearity(&half, kernel)?;
        free.axpby(1.0, &apply_pt_density(&n1, 0.5 * dt, opts.noise)?, dt)?
    };
    let out = DensityField::raw(next, nu.t() + dt);
    let diag = monitor(&out, opts)?;
    Ok((out, diag))
}

/// One recorded state of a [`MildRun`].
#[derive(Clone, Debug)]
pub struct MildSnapshot {
    pub step: usize,
    pub t: f64,
    pub density: DensityField,
    /// `ν̂_t` on the frequency grid (direct quadrature), when requested.
    pub char: Option<SpectralField>,
}

/// Aggregated monitor readings of a run.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct RunDiagnostics {
    pub positivity_flags: usize,
    pub worst_min_relative: f64,
    pub max_boundary_mass: f64,
    pub max_mass_drift: f64,
}

/// Output of [`solve`].
#[derive(Clone, Debug)]
pub struct MildRun {
    pub snapshots: Vec<MildSnapshot>,
    pub dt: f64,
    pub t_end: f64,
    pub kernel: String,
    pub options: SolverOptions,
    pub diagnostics: RunDiagnostics,
}

impl MildRun {
    /// The snapshot recorded at step `m`, if any.
    pub fn at_step(&self, m: usize) -> Option<&MildSnapshot> {
        self.snapshots.iter().find(|s| s.step == m)
    }

    /// Writes `t,x,v,density` rows for every snapshot.
    pub fn write_density_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,x,v,density")?;
        for s in &self.snapshots {
            let g = s.density.grid();
            for a in 0..g.nx {
                for b in 0..g.nv {
                    writeln!(w, "{:.17e},{:.17e},{:.17e},{:.17e}", s.t, g.x(a), g.v(b), s.density.field().at(a, b))?;
                }
            }
        }
        Ok(())
    }

    /// Writes `t,xi,eta,re,im` rows for every snapshot with a transform.
    pub fn write_char_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "t,xi,eta,re,im")?;
        for s in &self.snapshots {
            if let Some(c) = &s.char {
                let g = c.grid();
                for (j, &xi) in g.xi().iter().enumerate() {
                    for (k, &eta) in g.eta().iter().enumerate() {
                        let z = c.at(j, k);
                        writeln!(w, "{:.17e},{xi:.17e},{eta:.17e},{:.17e},{:.17e}", s.t, z.re, z.im)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Marches [`step_mild`] from `ν₀` to `T` with `M = T/dt` steps, recording
/// the given step indices (and `ν̂` on `freq`, when supplied).
pub fn solve(
    nu0: &DensityField,
    t_end: f64,
    dt: f64,
    kernel: &InteractionKernel,
    opts: &SolverOptions,
    snapshot_steps: &[usize],
    freq: Option<&Arc<FrequencyGrid>>,
) -> Result<MildRun> {
    if !(dt.is_finite() && dt > 0.0 && t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::invalid("need dt > 0 and T ≥ 0"));
    }
    let ratio = t_end / dt;
    let m = ratio.round() as usize;
    if (ratio - m as f64).abs() > 1e-9 * ratio.max(1.0) {
        return Err(Error::invalid(format!("T/dt = {ratio} is not an integer")));
    }
    if snapshot_steps.windows(2).any(|w| w[1] <= w[0]) || snapshot_steps.last().is_some_and(|&s| s > m) {
        return Err(Error::invalid("snapshot steps must be increasing and within 0..=M"));
    }
    let mut snapshots = Vec::with_capacity(snapshot_steps.len());
    let mut diag = RunDiagnostics { worst_min_relative: nu0.min_relative(), ..Default::default() };
    let record = |s: usize, nu: &DensityField, out: &mut Vec<MildSnapshot>| {
        out.push(MildSnapshot { step: s, t: s as f64 * dt, density: nu.clone(), char: freq.map(|g| nu.char_on(g)) });
    };
    let mut cur = DensityField::raw(nu0.field().clone(), 0.0);
    let mass0 = nu0.mass();
    let mut next_snap = 0;
    for s in 0..=m {
        if next_snap < snapshot_steps.len() && snapshot_steps[next_snap] == s {
            record(s, &cur, &mut snapshots);
            next_snap += 1;
        }
        if s == m {
            break;
        }
        let (nu, d) = step_mild(&cur, dt, kernel, opts)?;
        if d.positivity_violation {
            diag.positivity_flags += 1;
            log::debug!("positivity flag at step {}: min/max = {:.3e}", s + 1, d.min_relative);
        }
        diag.worst_min_relative = diag.worst_min_relative.min(d.min_relative);
        diag.max_boundary_mass = diag.max_boundary_mass.max(d.boundary_mass);
        diag.max_mass_drift = diag.max_mass_drift.max((nu.mass() - mass0).abs());
        cur = nu;
    }
    Ok(MildRun { snapshots, dt, t_end, kernel: kernel.name().to_string(), options: *opts, diagnostics: diag })
}
