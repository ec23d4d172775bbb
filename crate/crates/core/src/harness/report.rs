use super::stats::{fit_slope, mean_stderr, replica_independence, SlopeFit};
use crate::error::Result;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

/// Per-`N`, per-replica error statistics of an `N`-ladder study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub experiment: String,
    pub config_hash: String,
    pub master_seed: u64,
    pub code_version: String,
    /// What `errors` measures.
    pub metric: String,
    pub n_values: Vec<usize>,
    pub replicas: usize,
    /// `seeds[k][r]` drove replica `r` at `n_values[k]`.
    pub seeds: Vec<Vec<u64>>,
    /// `errors[k][r]`: the metric of replica `r` at `n_values[k]`.
    pub errors: Vec<Vec<f64>>,
    /// `profiles[k][r][q]`: the per-snapshot values behind `errors[k][r]`.
    pub profiles: Vec<Vec<Vec<f64>>>,
    pub snapshot_times: Vec<f64>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
    pub maxes: Vec<f64>,
    /// Fit of `log mean` against `log N` (needs three rungs).
    pub slope: Option<SlopeFit>,
    /// Mean error at the largest `N` over the mean at the smallest.
    pub largest_to_smallest: f64,
    /// Mean Spearman correlation of replica errors between adjacent rungs.
    pub rank_correlation: Option<f64>,
    pub replicas_independent: Option<bool>,
    /// Named scalar diagnostics (solver bias estimate and the like).
    pub diagnostics: BTreeMap<String, f64>,
}

/// The compact JSON summary written next to the full report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub experiment: String,
    pub config_hash: String,
    pub slope: Option<f64>,
    pub ci: Option<(f64, f64)>,
    pub n_values: Vec<usize>,
    pub means: Vec<f64>,
    pub stderrs: Vec<f64>,
}

impl ConvergenceReport {
    /// Aggregates replica values; `profiles[k][r]` holds the snapshot
    /// values whose maximum is the replica's error.
    #[allow(clippy::too_many_arguments)]
    pub fn assemble(
        experiment: &str,
        config_hash: String,
        master_seed: u64,
        metric: &str,
        n_values: Vec<usize>,
        seeds: Vec<Vec<u64>>,
        profiles: Vec<Vec<Vec<f64>>>,
        snapshot_times: Vec<f64>,
        diagnostics: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let errors: Vec<Vec<f64>> = profiles.iter().map(|rs| rs.iter().map(|p| p.iter().cloned().fold(0.0, f64::max)).collect()).collect();
        let (mut means, mut stderrs, mut maxes) = (Vec::new(), Vec::new(), Vec::new());
        for e in &errors {
            let (m, s) = mean_stderr(e);
            means.push(m);
            stderrs.push(s);
            maxes.push(e.iter().cloned().fold(0.0, f64::max));
        }
        let slope = if n_values.len() >= 3 {
            let pairs: Vec<(f64, f64)> = n_values.iter().zip(&means).map(|(&n, &m)| (n as f64, m)).collect();
            Some(fit_slope(&pairs)?)
        } else {
            None
        };
        let independence = replica_independence(&errors);
        Ok(ConvergenceReport {
            experiment: experiment.to_string(),
            config_hash,
            master_seed,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            metric: metric.to_string(),
            replicas: errors.first().map_or(0, Vec::len),
            largest_to_smallest: means.last().unwrap_or(&f64::NAN) / means.first().unwrap_or(&f64::NAN),
            n_values,
            seeds,
            errors,
            profiles,
            snapshot_times,
            means,
            stderrs,
            maxes,
            slope,
            rank_correlation: independence.map(|i| i.0),
            replicas_independent: independence.map(|i| i.1),
            diagnostics,
        })
    }

    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            experiment: self.experiment.clone(),
            config_hash: self.config_hash.clone(),
            slope: self.slope.map(|s| s.slope),
            ci: self.slope.map(|s| s.ci),
            n_values: self.n_values.clone(),
            means: self.means.clone(),
            stderrs: self.stderrs.clone(),
        }
    }

    /// `n,replica,seed,error` rows.
    pub fn replica_csv(&self) -> String {
        let mut s = String::from("n,replica,seed,error\n");
        for (k, n) in self.n_values.iter().enumerate() {
            for (r, e) in self.errors[k].iter().enumerate() {
                writeln!(s, "{n},{r},{},{e:.17e}", self.seeds[k][r]).unwrap();
            }
        }
        s
    }

    /// `n,replicas,mean,stderr,max` rows.
    pub fn aggregate_csv(&self) -> String {
        let mut s = String::from("n,replicas,mean,stderr,max\n");
        for (k, n) in self.n_values.iter().enumerate() {
            writeln!(s, "{n},{},{:.17e},{:.17e},{:.17e}", self.errors[k].len(), self.means[k], self.stderrs[k], self.maxes[k]).unwrap();
        }
        s
    }

    /// Writes `<experiment>_report.json`, `_summary.json`, `_replicas.csv`
    /// and `_aggregates.csv` into `dir` (each atomically) and returns the
    /// paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let e = &self.experiment;
        let files = [
            (format!("{e}_report.json"), serde_json::to_string_pretty(self).expect("report serializes")),
            (format!("{e}_summary.json"), serde_json::to_string_pretty(&self.summary()).expect("summary serializes")),
            (format!("{e}_replicas.csv"), self.replica_csv()),
            (format!("{e}_aggregates.csv"), self.aggregate_csv()),
        ];
        files.into_iter().map(|(name, body)| write_atomic(&dir.join(name), body.as_bytes())).collect()
    }
}

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<PathBuf> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(path.to_path_buf())
}

/// Counter-based seed for replica `r` at particle count `n`, derived from
/// the master seed (SplitMix64 finaliser applied to the triple).
pub fn replica_seed(master: u64, n: usize, r: usize) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(mix(mix(master) ^ n as u64) ^ (r as u64).wrapping_mul(0xD1B5_4A32_D192_ED03))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(errs: Vec<Vec<f64>>) -> ConvergenceReport {
        let n_values: Vec<usize> = (0..errs.len()).map(|k| 64 << k).collect();
        let seeds = n_values.iter().map(|&n| (0..errs[0].len()).map(|r| replica_seed(1, n, r)).collect()).collect();
        let profiles = errs.into_iter().map(|rs| rs.into_iter().map(|e| vec![0.5 * e, e]).collect()).collect();
        ConvergenceReport::assemble("lln", "abc".into(), 1, "m", n_values, seeds, profiles, vec![0.0, 1.0], BTreeMap::new()).unwrap()
    }

    #[test]
    fn injected_power_law_gives_its_slope() {
        let r = report((0..5).map(|k| vec![0.3 * ((64 << k) as f64).powf(-0.5); 3]).collect());
        assert!((r.slope.unwrap().slope + 0.5).abs() < 1e-12);
        assert!((r.largest_to_smallest - 0.25).abs() < 1e-12);
    }

    #[test]
    fn files_are_written_atomically_and_deterministically() {
        let dir = tempfile::tempdir().unwrap();
        let r = report(vec![vec![1.0, 2.0, 3.0], vec![0.5, 0.7, 0.9], vec![0.2, 0.3, 0.4]]);
        let paths = r.write(dir.path()).unwrap();
        let first: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        r.write(dir.path()).unwrap();
        let second: Vec<Vec<u8>> = paths.iter().map(|p| std::fs::read(p).unwrap()).collect();
        assert_eq!(first, second);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 4);
        let back: ConvergenceReport = serde_json::from_slice(&first[0]).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn replica_seeds_are_distinct() {
        let mut s: Vec<u64> = (0..7).flat_map(|k| (0..20).map(move |r| replica_seed(9, 64 << k, r))).collect();
        s.sort();
        s.dedup();
        assert_eq!(s.len(), 140);
    }
}
