//! The `kinlab` command line.

use super::config::{Experiment, ExperimentConfig};
use super::lln::{run_lln, run_zdecay};
use super::report::write_atomic;
use super::residual::run_mild_residual;
use super::verify::run_verify;
use crate::error::{Error, Result};
use crate::mildsolver::{solve, DensityField, SolverOptions};
use crate::particles::{simulate, write_increments, write_path_csv, Recording, SimConfig};
use crate::spectral::{dual_norm_checked, measure_char, KineticPoint};
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Kinetic mean-field laboratory.
#[derive(Debug, Parser)]
#[command(name = "kinlab", version, about)]
pub struct Cli {
    /// Experiment configuration (TOML); defaults apply to absent keys.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Master seed (overrides the configuration).
    #[arg(long, global = true, value_name = "U64")]
    pub seed: Option<u64>,
    /// Output directory (overrides the configuration).
    #[arg(long, global = true, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true, value_name = "N")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one particle system; writes snapshot CSV and increments.
    Simulate {
        /// Particle count (default: the first rung of the N-ladder).
        #[arg(long)]
        n: Option<usize>,
    },
    /// Solve the mean-field equation; writes density and transform CSVs.
    Solve {
        /// Export every snapshot instead of the initial and final ones.
        #[arg(long)]
        all_snapshots: bool,
    },
    /// Dual Sobolev norm of a weighted point cloud read from CSV
    /// (columns `x,v` and optionally `mass`).
    Norm {
        #[arg(long, value_name = "CSV")]
        points: PathBuf,
    },
    /// Law-of-large-numbers study over the N-ladder.
    Lln,
    /// Decay study of the stochastic convolution.
    Zdecay,
    /// Mild-identity residual under step refinement.
    MildResidual,
    /// Runs the property suite.
    Verify,
}

impl Command {
    fn experiment(&self) -> Experiment {
        match self {
            Command::Zdecay => Experiment::Zdecay,
            Command::MildResidual => Experiment::MildResidual,
            _ => Experiment::Lln,
        }
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code: 0 on success, 1 on invalid input or a failed check,
/// 2 on a breached numerical contract.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::defaults(cli.command.experiment()),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.output_dir = o.clone();
    }
    if matches!(cli.command, Command::Lln | Command::Zdecay | Command::MildResidual) {
        cfg.experiment = cli.command.experiment();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::invalid("--threads must be ≥ 1"));
        }
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialised; --threads ignored");
        }
    }
    let cfg = load_config(cli)?;
    let out = cfg.output_dir.clone();
    match &cli.command {
        Command::Simulate { n } => simulate_cmd(&cfg, n.unwrap_or(cfg.particles.n_ladder[0]), &out),
        Command::Solve { all_snapshots } => solve_cmd(&cfg, *all_snapshots, &out),
        Command::Norm { points } => norm_cmd(&cfg, points),
        Command::Lln | Command::Zdecay => {
            let report = if matches!(cli.command, Command::Lln) { run_lln(&cfg)? } else { run_zdecay(&cfg)? };
            report.write(&out)?;
            write_atomic(&out.join(format!("{}_config.toml", report.experiment)), cfg.to_toml().as_bytes())?;
            println!("{}", serde_json::to_string_pretty(&report.summary()).expect("serializable"));
            Ok(true)
        }
        Command::MildResidual => {
            let r = run_mild_residual(&cfg)?;
            std::fs::create_dir_all(&out)?;
            let body = serde_json::to_string_pretty(&r).expect("serializable");
            write_atomic(&out.join("mild_residual.json"), body.as_bytes())?;
            println!("{body}");
            Ok(true)
        }
        Command::Verify => {
            let r = run_verify(&cfg);
            print!("{}", r.render());
            Ok(r.passed())
        }
    }
}

fn simulate_cmd(cfg: &ExperimentConfig, n: usize, out: &Path) -> Result<bool> {
    let path = simulate(&SimConfig {
        n,
        t_end: cfg.model.t_end,
        dt: cfg.particles.dt,
        noise: cfg.model.noise,
        kernel: cfg.model.kernel.build()?,
        initial: cfg.initial_sampler(),
        seed: cfg.seed,
        recording: Recording::Steps(cfg.snapshot_steps()?),
    })?;
    std::fs::create_dir_all(out)?;
    let mut csv = Vec::new();
    write_path_csv(&path, &mut csv)?;
    write_atomic(&out.join("paths.csv"), &csv)?;
    let mut bin = Vec::new();
    write_increments(path.increments(), &mut bin)?;
    write_atomic(&out.join("increments.bin"), &bin)?;
    println!("simulated N={n} over {} steps; wrote paths.csv and increments.bin to {}", path.n_steps(), out.display());
    Ok(true)
}

fn solve_cmd(cfg: &ExperimentConfig, all: bool, out: &Path) -> Result<bool> {
    let stride = cfg.solver_stride()?;
    let mut steps: Vec<usize> = cfg.snapshot_steps()?.iter().map(|s| s / stride).collect();
    if !all {
        steps = vec![steps[0], *steps.last().unwrap()];
    }
    let nu0 = DensityField::from_mixture(cfg.physical_grid()?, &cfg.model.initial)?;
    let opts = SolverOptions { noise: cfg.model.noise, boundary_tol: cfg.solver.boundary_tol, ..Default::default() };
    let freq = cfg.frequency.build()?;
    let run = solve(&nu0, cfg.model.t_end, cfg.solver.dt, &cfg.model.kernel.build()?, &opts, &steps, Some(&freq))?;
    std::fs::create_dir_all(out)?;
    let mut dens = Vec::new();
    run.write_density_csv(&mut dens)?;
    write_atomic(&out.join("solution_density.csv"), &dens)?;
    let mut chars = Vec::new();
    run.write_char_csv(&mut chars)?;
    write_atomic(&out.join("solution_char.csv"), &chars)?;
    let d = run.diagnostics;
    println!(
        "solved to T={} with dt={}; max mass drift {:.2e}, max boundary mass {:.2e}, positivity flags {}",
        run.t_end, run.dt, d.max_mass_drift, d.max_boundary_mass, d.positivity_flags
    );
    Ok(true)
}

/// Reads `x,v[,mass]` rows; uniform masses when the column is absent.
fn read_points(path: &Path) -> Result<(Vec<KineticPoint>, Vec<f64>)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::invalid(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header: Vec<String> =
        lines.next().ok_or_else(|| Error::Format("empty points file".into()))?.split(',').map(|s| s.trim().to_string()).collect();
    let col = |name: &str| header.iter().position(|h| h == name);
    let (ix, iv) = (
        col("x").ok_or_else(|| Error::Format("missing column x".into()))?,
        col("v").ok_or_else(|| Error::Format("missing column v".into()))?,
    );
    let im = col("mass");
    let (mut pts, mut masses) = (Vec::new(), Vec::new());
    for (k, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            cells.get(i).and_then(|c| c.parse().ok()).ok_or_else(|| Error::Format(format!("bad number on data row {}", k + 1)))
        };
        pts.push(KineticPoint::new(num(ix)?, num(iv)?));
        masses.push(match im {
            Some(i) => num(i)?,
            None => 1.0,
        });
    }
    if im.is_none() {
        let n = masses.len() as f64;
        masses.iter_mut().for_each(|m| *m /= n);
    }
    Ok((pts, masses))
}

fn norm_cmd(cfg: &ExperimentConfig, points: &Path) -> Result<bool> {
    let (pts, masses) = read_points(points)?;
    let grid = cfg.frequency.build()?;
    let est = dual_norm_checked(&measure_char(&pts, &masses, &grid)?, cfg.order()?, 1e-3)?;
    let mut stdout = std::io::stdout().lock();
    writeln!(
        stdout,
        "{}",
        serde_json::json!({
            "points": pts.len(),
            "s": cfg.sobolev_s,
            "dual_norm": est.value,
            "tail_certificate": est.tail_certificate,
            "within_tolerance": est.within_tolerance,
        })
    )?;
    Ok(true)
}
