use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

/// Least-squares line through `(log N, log value)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub stderr: f64,
    /// 95% confidence interval of the slope (Student t, `n − 2` degrees of
    /// freedom); degenerate when the fit is exact or has no residual
    /// degrees of freedom.
    pub ci: (f64, f64),
}

/// Ordinary least squares of `log value` on `log N`. Needs at least three
/// distinct `N` and positive values.
pub fn fit_slope(pairs: &[(f64, f64)]) -> Result<SlopeFit> {
    if pairs.iter().any(|&(n, v)| !(n.is_finite() && n > 0.0 && v.is_finite() && v > 0.0)) {
        return Err(Error::invalid("slope fitting needs positive finite N and values"));
    }
    let mut ns: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    ns.sort_by(f64::total_cmp);
    ns.dedup();
    if ns.len() < 3 {
        return Err(Error::invalid("slope fitting needs at least three distinct N"));
    }
    let k = pairs.len() as f64;
    let xs: Vec<f64> = pairs.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    let dof = k - 2.0;
    let stderr = (sse / dof / sxx).sqrt();
    let q = StudentsT::new(0.0, 1.0, dof).map_err(|e| Error::Numerical(e.to_string()))?.inverse_cdf(0.975);
    Ok(SlopeFit { slope, intercept, stderr, ci: (slope - q * stderr, slope + q * stderr) })
}

/// Sample mean and standard error of the mean (zero for one sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for q in i..=j {
            r[idx[q]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation of two equally long samples.
pub fn spearman(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() || a.len() < 3 {
        return Err(Error::invalid("rank correlation needs two samples of equal length ≥ 3"));
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let (ma, _) = mean_stderr(&ra);
    let (mb, _) = mean_stderr(&rb);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return Ok(0.0);
    }
    Ok(cov / (va * vb).sqrt())
}

/// Independence sanity check across the replica columns of an `N`-ladder:
/// the mean Spearman correlation between replica `r` at consecutive `N`
/// should be within three standard deviations (`1/√((R−1)(K−1))`) of zero.
/// Returns the mean correlation and the verdict; `None` when there are
/// fewer than three replicas or two rungs.
pub fn replica_independence(errors: &[Vec<f64>]) -> Option<(f64, bool)> {
    if errors.len() < 2 || errors[0].len() < 3 {
        return None;
    }
    let rhos: Vec<f64> = errors.windows(2).filter_map(|w| spearman(&w[0], &w[1]).ok()).collect();
    let mean = rhos.iter().sum::<f64>() / rhos.len() as f64;
    let sd = 1.0 / (((errors[0].len() - 1) * rhos.len()) as f64).sqrt();
    Some((mean, mean.abs() <= 3.0 * sd))
}
