//! Experiment orchestration: configuration, the `N`-ladder studies,
//! slope fitting, reports, the property suite and the command line.

pub mod cli;
mod config;
mod lln;
mod report;
mod residual;
mod stats;
mod verify;

pub use config::{
    Experiment, ExperimentConfig, FrequencyConfig, KernelConfig, ModelConfig, ParticleConfig, ResidualConfig, SamplerKind, SolverConfig,
};
pub use lln::{run_lln, run_zdecay, solver_reference, SolverReference};
pub use report::{replica_seed, write_atomic, ConvergenceReport, ReportSummary};
pub use residual::{gaussian_test_function, run_mild_residual, ResidualReport};
pub use stats::{fit_slope, mean_stderr, replica_independence, spearman, SlopeFit};
pub use verify::{run_verify, Check, CheckKind, VerifyReport};
