//! Bootstrap resampling of transfer matrices and the statistics reported on
//! top of selector runs.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::TransferMatrix;
use crate::rng::SeededRng;

pub const DEFAULT_BOOTSTRAP_COUNT: usize = 100;
pub const DEFAULT_CI_RESAMPLES: usize = 10_000;
pub const CI_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BootstrapSpec {
    pub count: usize,
    pub seed: u64,
}

impl Default for BootstrapSpec {
    fn default() -> Self {
        Self {
            count: DEFAULT_BOOTSTRAP_COUNT,
            seed: 0,
        }
    }
}

/// Resamples rows with replacement: row `i` of bootstrap trial `b` is row `i`
/// of a uniformly drawn original trial. Each `(b, i)` pair has its own
/// sub-stream, so the result does not depend on evaluation order.
pub fn bootstrap(matrix: &TransferMatrix, spec: &BootstrapSpec) -> Result<TransferMatrix> {
    if spec.count == 0 {
        return Err(invalid("bootstrap count must be positive"));
    }
    let n = matrix.size();
    let t = matrix.num_trials();
    let trials: Vec<Vec<f64>> = (0..spec.count)
        .into_par_iter()
        .map(|b| {
            let mut out = Vec::with_capacity(n * n);
            for i in 0..n {
                let idx = ((b as u64) << 32) | i as u64;
                let src = SeededRng::stream(spec.seed, idx).below(t);
                out.extend_from_slice(matrix.row(src, i));
            }
            out
        })
        .collect();
    TransferMatrix::new(
        format!("{}/bootstrap{}", matrix.name(), spec.count),
        matrix.grid().clone(),
        trials,
        matrix.is_normalized(),
    )
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Lower median: element `(n - 1) / 2` of the sorted values.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Interquartile mean: drops `floor(n / 4)` values from each end of the
/// sorted list and averages the rest.
pub fn iqm(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    iqm_sorted(&v)
}

fn iqm_sorted(v: &[f64]) -> f64 {
    let cut = v.len() / 4;
    mean(&v[cut..v.len() - cut])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Statistic {
    Mean,
    Median,
    Iqm,
}

impl Statistic {
    pub fn apply(self, values: &[f64]) -> f64 {
        match self {
            Statistic::Mean => mean(values),
            Statistic::Median => median(values),
            Statistic::Iqm => iqm(values),
        }
    }
}

/// Half-width of the 95% percentile-bootstrap interval of `stat`.
///
/// The interval ends are the order statistics at ranks `floor(0.025 B)` and
/// `ceil(0.975 B) - 1` (0-based) of the `B` resampled statistics.
pub fn ci_half_width(values: &[f64], stat: Statistic, resamples: usize, seed: u64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::InsufficientData(
            "a confidence interval needs at least two values".into(),
        ));
    }
    if resamples == 0 {
        return Err(invalid("resample count must be positive"));
    }
    let n = values.len();
    let mut rng = SeededRng::new(seed);
    let mut buf = vec![0.0; n];
    let mut stats: Vec<f64> = (0..resamples)
        .map(|_| {
            for b in buf.iter_mut() {
                *b = values[rng.below(n)];
            }
            match stat {
                Statistic::Mean => mean(&buf),
                Statistic::Median => {
                    buf.sort_by(f64::total_cmp);
                    buf[(n - 1) / 2]
                }
                Statistic::Iqm => {
                    buf.sort_by(f64::total_cmp);
                    iqm_sorted(&buf)
                }
            }
        })
        .collect();
    stats.sort_by(f64::total_cmp);
    Ok(percentile_half_width(&stats))
}

fn percentile_half_width(sorted: &[f64]) -> f64 {
    let b = sorted.len() as f64;
    let alpha = (1.0 - CI_LEVEL) / 2.0;
    let lo = (alpha * b).floor() as usize;
    let hi = (((1.0 - alpha) * b).ceil() as usize).clamp(1, sorted.len()) - 1;
    ((sorted[hi] - sorted[lo.min(hi)]) / 2.0).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerformanceStats {
    pub mean: f64,
    pub median: f64,
    pub iqm: f64,
    /// CI half-width of the mean.
    pub ci_half_width: f64,
    pub ci_median: f64,
    pub ci_iqm: f64,
}

/// Mean, lower median and IQM with their bootstrap CI half-widths. A single
/// value gets zero-width intervals.
pub fn performance_stats(values: &[f64], resamples: usize, seed: u64) -> Result<PerformanceStats> {
    if values.is_empty() {
        return Err(invalid("statistics need at least one value"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(invalid("statistics need finite values"));
    }
    let ci = |s| {
        if values.len() < 2 {
            Ok(0.0)
        } else {
            ci_half_width(values, s, resamples, seed)
        }
    };
    Ok(PerformanceStats {
        mean: mean(values),
        median: median(values),
        iqm: iqm(values),
        ci_half_width: ci(Statistic::Mean)?,
        ci_median: ci(Statistic::Median)?,
        ci_iqm: ci(Statistic::Iqm)?,
    })
}

/// Scores of one benchmark rescaled so that Random maps to 0 and the myopic
/// oracle to 1.
pub fn normalized_performance(method: f64, random: f64, oracle: f64) -> Result<f64> {
    let span = oracle - random;
    if span == 0.0 || !span.is_finite() {
        return Err(Error::Degenerate(format!(
            "oracle and random scores coincide ({oracle})"
        )));
    }
    Ok((method - random) / span)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub value: f64,
    /// Benchmarks that entered the mean.
    pub used: Vec<usize>,
    /// Benchmarks dropped because oracle and random coincide.
    pub excluded: Vec<usize>,
}

/// Mean normalized performance over benchmarks. With `skip_degenerate`,
/// benchmarks where oracle equals random are left out instead of failing.
pub fn aggregated_performance(
    method: &[f64],
    random: &[f64],
    oracle: &[f64],
    skip_degenerate: bool,
) -> Result<Aggregate> {
    if method.len() != random.len() || method.len() != oracle.len() || method.is_empty() {
        return Err(invalid(format!(
            "score lists must be non-empty and equally long ({}, {}, {})",
            method.len(),
            random.len(),
            oracle.len()
        )));
    }
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    let mut total = 0.0;
    for j in 0..method.len() {
        match normalized_performance(method[j], random[j], oracle[j]) {
            Ok(v) => {
                total += v;
                used.push(j);
            }
            Err(_) if skip_degenerate => excluded.push(j),
            Err(e) => return Err(e),
        }
    }
    if used.is_empty() {
        return Err(Error::Degenerate("every benchmark is degenerate".into()));
    }
    Ok(Aggregate {
        value: total / used.len() as f64,
        used,
        excluded,
    })
}

/// Per-matrix scores of one benchmark for the three roles of the metric.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkScores {
    pub method: Vec<f64>,
    pub random: Vec<f64>,
    pub oracle: Vec<f64>,
}

/// Percentile-bootstrap CI half-width of the aggregated performance. Each
/// resample draws matrix indices per benchmark, shared by the three roles.
/// Benchmarks whose resampled oracle and random means coincide are skipped
/// within that resample.
pub fn aggregated_ci_half_width(
    benchmarks: &[BenchmarkScores],
    resamples: usize,
    seed: u64,
) -> Result<f64> {
    if benchmarks.is_empty() || resamples == 0 {
        return Err(invalid("need at least one benchmark and one resample"));
    }
    for b in benchmarks {
        let n = b.method.len();
        if n == 0 || b.random.len() != n || b.oracle.len() != n {
            return Err(invalid("benchmark score lists must be non-empty and equally long"));
        }
    }
    let mut rng = SeededRng::new(seed);
    let mut stats = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut total = 0.0;
        let mut used = 0usize;
        for b in benchmarks {
            let n = b.method.len();
            let (mut m, mut r, mut o) = (0.0, 0.0, 0.0);
            for _ in 0..n {
                let i = rng.below(n);
                m += b.method[i];
                r += b.random[i];
                o += b.oracle[i];
            }
            let nf = n as f64;
            if let Ok(v) = normalized_performance(m / nf, r / nf, o / nf) {
                total += v;
                used += 1;
            }
        }
        if used > 0 {
            stats.push(total / used as f64);
        }
    }
    if stats.is_empty() {
        return Err(Error::Degenerate("every resample is degenerate".into()));
    }
    stats.sort_by(f64::total_cmp);
    Ok(percentile_half_width(&stats))
}

/// Mean per-round performance over the `K` rounds of a trace.
pub fn auc(trace: &[f64]) -> Result<f64> {
    if trace.is_empty() {
        return Err(invalid("AUC needs at least one round"));
    }
    Ok(mean(trace))
}

/// First round (1-based) whose performance is within `epsilon` of the
/// reference, or `None` if it never gets there.
pub fn epsilon_suboptimal_round(trace: &[f64], reference: f64, epsilon: f64) -> Option<usize> {
    trace
        .iter()
        .position(|&v| v >= reference - epsilon)
        .map(|k| k + 1)
}

/// Element-wise mean of equally long traces.
pub fn mean_trace(traces: &[Vec<f64>]) -> Result<Vec<f64>> {
    let first = traces
        .first()
        .ok_or_else(|| invalid("need at least one trace"))?;
    if traces.iter().any(|t| t.len() != first.len()) {
        return Err(invalid("traces differ in length"));
    }
    Ok((0..first.len())
        .map(|k| traces.iter().map(|t| t[k]).sum::<f64>() / traces.len() as f64)
        .collect())
}
