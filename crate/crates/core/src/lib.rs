//! A numerical laboratory for interacting kinetic particle systems and their
//! mean-field limit.
//!
//! The crate bundles six pieces that share one Fourier convention:
//!
//! * [`spectral`] — kinetic geometry, the anisotropic Sobolev weight
//!   `(1 + |ξ|^{2/3} + |η|²)^s`, frequency-space quadrature and dual norms of
//!   measures;
//! * [`semigroup`] — the free kinetic semigroup `P_t` (transport shear plus
//!   velocity diffusion), its Gaussian density and Fourier multiplier;
//! * [`particles`] — the interacting particle system with exact Gaussian
//!   kinetic noise and stored Brownian increments;
//! * [`mildsolver`] — a spectral exponential integrator for the kinetic
//!   McKean–Vlasov equation and a Picard cross-check;
//! * [`convolution`] — the stochastic convolution `z^N_t` and the mild
//!   identity satisfied by the empirical measure;
//! * [`harness`] — experiment configuration, convergence studies, slope fits,
//!   reports and the `kinlab` command line.
//!
//! Characteristic functions use `μ̂(ξ,η) = ∫ exp(i(ξx + ηv)) dμ`, and the same
//! `+i` transform is applied to test functions, so that
//! `⟨μ, f⟩ = (2π)^{-2} ∫ conj(f̂) μ̂`.

pub mod convolution;
pub mod error;
pub(crate) mod fft;
pub mod harness;
pub(crate) mod linalg;
pub mod mildsolver;
pub mod particles;
pub mod semigroup;
pub mod spectral;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
