//! The interacting kinetic particle system
//! `dx = v dt`, `dv = (1/N)Σ_j γ(x−x_j, v−v_j) dt + √2 dB` with exact Gaussian
//! kinetic noise and stored Brownian increments.

mod io;
mod kernel;
mod sampler;
mod sim;

pub use io::{read_increments, write_increments, write_path_csv, INCREMENTS_MAGIC, INCREMENTS_VERSION};
pub use kernel::{drift, drift_fast, drift_pairwise, FourierForm, InteractionKernel};
pub use sampler::{korobov_generator, GaussianComponent, GaussianMixture, InitialSampler};
pub use sim::{empirical_char, simulate, simulate_with, step, BrownianIncrements, EnsemblePath, Recording, SimConfig};
