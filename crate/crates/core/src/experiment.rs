//! Experiment pipeline: normalize, bootstrap, run every method on every
//! matrix, then summarize.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cluster::{MmbtlConfig, MmbtlSelector};
use crate::detection::{DetectionConfig, ObservedHistory};
use crate::error::{invalid, Error, Result};
use crate::eval::{
    aggregated_ci_half_width, aggregated_performance, auc, bootstrap, epsilon_suboptimal_round,
    mean_trace, performance_stats, BenchmarkScores, BootstrapSpec, PerformanceStats,
    DEFAULT_CI_RESAMPLES,
};
use crate::gp_select::{GpMbtlConfig, GpMbtlSelector};
use crate::matrix::{min_max_normalize, TransferMatrix};
use crate::orchestrate::{run_selector, MgpSelector, OracleSelector, RandomSelector, Selector, SelectorRun};
use crate::rng::mix_seed;

pub const DEFAULT_RANDOM_REPEATS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mgp,
    M,
    Gp,
    Random,
    MyopicOracle,
    SequentialOracle,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Mgp,
        Method::M,
        Method::Gp,
        Method::Random,
        Method::MyopicOracle,
        Method::SequentialOracle,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mgp => "mgp",
            Method::M => "m",
            Method::Gp => "gp",
            Method::Random => "random",
            Method::MyopicOracle => "myopic-oracle",
            Method::SequentialOracle => "sequential-oracle",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown method {s:?} (expected one of mgp, m, gp, random, myopic-oracle, sequential-oracle)"
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub methods: Vec<Method>,
    /// Decision rounds K; `None` means K = N.
    pub rounds: Option<usize>,
    /// `None` runs on the input trials directly.
    pub bootstrap: Option<BootstrapSpec>,
    pub normalize: bool,
    pub mmbtl: MmbtlConfig,
    pub gp: GpMbtlConfig,
    pub detection: DetectionConfig,
    pub random_repeats: usize,
    pub ci_resamples: usize,
    /// Seed of the confidence-interval resampling.
    pub seed: u64,
    pub epsilons: Vec<f64>,
    /// Drop benchmarks where oracle equals random from the aggregate.
    pub skip_degenerate: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            methods: vec![Method::Mgp, Method::M, Method::Gp, Method::Random, Method::MyopicOracle],
            rounds: None,
            bootstrap: Some(BootstrapSpec::default()),
            normalize: true,
            mmbtl: MmbtlConfig::default(),
            gp: GpMbtlConfig::default(),
            detection: DetectionConfig::default(),
            random_repeats: DEFAULT_RANDOM_REPEATS,
            ci_resamples: DEFAULT_CI_RESAMPLES,
            seed: 0,
            epsilons: vec![0.01, 0.005, 0.001],
            skip_degenerate: true,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self, n: usize) -> Result<usize> {
        if self.methods.is_empty() {
            return Err(invalid("at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(invalid(format!("method {m} listed twice")));
            }
        }
        let k = self.rounds.unwrap_or(n);
        if k == 0 || k > n {
            return Err(invalid(format!("rounds K={k} must be in 1..={n}")));
        }
        if self.random_repeats == 0 {
            return Err(invalid("random repeats must be positive"));
        }
        if self.ci_resamples == 0 {
            return Err(invalid("CI resamples must be positive"));
        }
        if self.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("epsilons must be positive"));
        }
        self.mmbtl.resolved_samples(n)?;
        self.gp.validate()?;
        Ok(k)
    }
}

/// One method on one matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixRun {
    pub selected: Vec<usize>,
    pub trace: Vec<f64>,
    pub branches: Vec<Option<String>>,
}

impl From<SelectorRun> for MatrixRun {
    fn from(r: SelectorRun) -> Self {
        Self {
            selected: r.selected,
            trace: r.trace,
            branches: r.branches,
        }
    }
}

impl MatrixRun {
    pub fn final_performance(&self) -> f64 {
        *self.trace.last().expect("runs have at least one round")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MethodResult {
    pub method: Method,
    pub runs: Vec<MatrixRun>,
}

impl MethodResult {
    pub fn finals(&self) -> Vec<f64> {
        self.runs.iter().map(MatrixRun::final_performance).collect()
    }

    pub fn aucs(&self) -> Vec<f64> {
        self.runs.iter().map(|r| auc(&r.trace).expect("non-empty trace")).collect()
    }

    pub fn mean_trace(&self) -> Vec<f64> {
        let traces: Vec<Vec<f64>> = self.runs.iter().map(|r| r.trace.clone()).collect();
        mean_trace(&traces).expect("equal-length traces")
    }

    pub fn mean_final(&self) -> f64 {
        let f = self.finals();
        f.iter().sum::<f64>() / f.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkResult {
    pub name: String,
    pub size: usize,
    pub rounds: usize,
    pub matrices: usize,
    pub methods: Vec<MethodResult>,
}

impl BenchmarkResult {
    pub fn method(&self, m: Method) -> Option<&MethodResult> {
        self.methods.iter().find(|r| r.method == m)
    }
}

/// Replays a fixed sequence through the runner.
struct Replay {
    name: String,
    sequence: Vec<usize>,
    next: usize,
}

impl Selector for Replay {
    fn name(&self) -> &str {
        &self.name
    }

    fn select(&mut self, _history: &ObservedHistory) -> Result<usize> {
        let t = *self
            .sequence
            .get(self.next)
            .ok_or_else(|| invalid("replayed sequence is too short"))?;
        self.next += 1;
        Ok(t)
    }

    fn reset(&mut self) {
        self.next = 0;
    }
}

fn replay_all(matrix: &TransferMatrix, method: Method, sequence: &[usize], k: usize) -> Result<Vec<MatrixRun>> {
    (0..matrix.num_trials())
        .into_par_iter()
        .map(|w| {
            let mut r = Replay {
                name: method.to_string(),
                sequence: sequence.to_vec(),
                next: 0,
            };
            run_selector(matrix, w, &mut r, k).map(MatrixRun::from)
        })
        .collect()
}

fn per_matrix<F>(matrix: &TransferMatrix, k: usize, make: F) -> Result<Vec<MatrixRun>>
where
    F: Fn(usize) -> Result<Box<dyn Selector>> + Sync,
{
    (0..matrix.num_trials())
        .into_par_iter()
        .map(|w| {
            let mut s = make(w)?;
            run_selector(matrix, w, s.as_mut(), k).map(MatrixRun::from)
        })
        .collect()
}

/// Runs one method on every trial of an already prepared matrix.
pub fn run_method(
    matrix: &Arc<TransferMatrix>,
    method: Method,
    k: usize,
    config: &ExperimentConfig,
) -> Result<MethodResult> {
    let runs = match method {
        Method::M => {
            // M-MBTL reads only the grid and the selection list, so one
            // sequence serves every matrix.
            let mut s = MmbtlSelector::new(config.mmbtl.clone());
            let seq = run_selector(matrix, 0, &mut s, k)?.selected;
            replay_all(matrix, method, &seq, k)?
        }
        Method::MyopicOracle => {
            let seq = OracleSelector::myopic(matrix.clone()).sequence(k)?;
            replay_all(matrix, method, &seq, k)?
        }
        Method::SequentialOracle => per_matrix(matrix, k, |w| {
            Ok(Box::new(OracleSelector::sequential(matrix.clone(), w)?))
        })?,
        Method::Gp => per_matrix(matrix, k, |_| Ok(Box::new(GpMbtlSelector::new(config.gp.clone()))))?,
        Method::Mgp => per_matrix(matrix, k, |_| {
            Ok(Box::new(MgpSelector::new(
                config.mmbtl.clone(),
                config.gp.clone(),
                config.detection,
            )))
        })?,
        Method::Random => (0..matrix.num_trials())
            .into_par_iter()
            .map(|w| {
                let mut first = None;
                let mut traces = Vec::with_capacity(config.random_repeats);
                for j in 0..config.random_repeats {
                    let mut s = RandomSelector::new(RandomSelector::repeat_seed(w, j));
                    let r = run_selector(matrix, w, &mut s, k)?;
                    traces.push(r.trace.clone());
                    first.get_or_insert(r);
                }
                let first = first.expect("at least one repeat");
                Ok(MatrixRun {
                    selected: first.selected,
                    trace: mean_trace(&traces)?,
                    branches: first.branches,
                })
            })
            .collect::<Result<Vec<_>>>()?,
    };
    Ok(MethodResult { method, runs })
}

/// Normalizes (when configured and not already done), then bootstraps.
pub fn prepare(matrix: &TransferMatrix, config: &ExperimentConfig) -> Result<TransferMatrix> {
    let base = if config.normalize && !matrix.is_normalized() {
        min_max_normalize(matrix)?
    } else {
        matrix.clone()
    };
    match &config.bootstrap {
        Some(spec) => bootstrap(&base, spec),
        None => Ok(base),
    }
}

pub fn run_benchmark(name: &str, matrix: &TransferMatrix, config: &ExperimentConfig) -> Result<BenchmarkResult> {
    let k = config.validate(matrix.size())?;
    let prepared = Arc::new(prepare(matrix, config)?);
    let mut methods = Vec::with_capacity(config.methods.len());
    for &m in &config.methods {
        methods.push(run_method(&prepared, m, k, config)?);
    }
    Ok(BenchmarkResult {
        name: name.to_string(),
        size: prepared.size(),
        rounds: k,
        matrices: prepared.num_trials(),
        methods,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub benchmark: String,
    pub method: Method,
    pub stat: &'static str,
    pub value: f64,
    pub ci_half_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub aggregated_performance: f64,
    pub ci_half_width: f64,
    pub benchmarks_used: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub benchmark: String,
    pub method: Method,
    pub epsilon: f64,
    pub round: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub benchmarks: Vec<BenchmarkResult>,
    pub summary: Vec<SummaryRow>,
    pub aggregate: Vec<AggregateRow>,
    pub epsilon: Vec<EpsilonRow>,
}

/// Final-round mean, median and IQM, plus AUC, for one method.
pub fn method_stats(r: &MethodResult, resamples: usize, seed: u64) -> Result<(PerformanceStats, PerformanceStats)> {
    let s = mix_seed(seed, r.method.id());
    Ok((
        performance_stats(&r.finals(), resamples, s)?,
        performance_stats(&r.aucs(), resamples, s ^ 0xA0C)?,
    ))
}

pub fn summarize(benchmarks: Vec<BenchmarkResult>, config: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut summary = Vec::new();
    let mut epsilon = Vec::new();
    for b in &benchmarks {
        for r in &b.methods {
            let (fin, area) = method_stats(r, config.ci_resamples, config.seed)?;
            for (stat, value, ci) in [
                ("mean", fin.mean, fin.ci_half_width),
                ("median", fin.median, fin.ci_median),
                ("iqm", fin.iqm, fin.ci_iqm),
                ("auc", area.mean, area.ci_half_width),
            ] {
                summary.push(SummaryRow {
                    benchmark: b.name.clone(),
                    method: r.method,
                    stat,
                    value,
                    ci_half_width: ci,
                });
            }
        }
        // The reference is the myopic oracle's mean performance at round K.
        if let Some(oracle) = b.method(Method::MyopicOracle) {
            let reference = oracle.mean_final();
            for r in &b.methods {
                let trace = r.mean_trace();
                for &eps in &config.epsilons {
                    epsilon.push(EpsilonRow {
                        benchmark: b.name.clone(),
                        method: r.method,
                        epsilon: eps,
                        round: epsilon_suboptimal_round(&trace, reference, eps),
                    });
                }
            }
        }
    }

    let mut aggregate = Vec::new();
    let complete: Vec<&BenchmarkResult> = benchmarks
        .iter()
        .filter(|b| b.method(Method::Random).is_some() && b.method(Method::MyopicOracle).is_some())
        .collect();
    if !complete.is_empty() {
        for &m in &config.methods {
            let mut method = Vec::new();
            let mut random = Vec::new();
            let mut oracle = Vec::new();
            let mut scores = Vec::new();
            for b in &complete {
                let (Some(rm), Some(rr), Some(ro)) =
                    (b.method(m), b.method(Method::Random), b.method(Method::MyopicOracle))
                else {
                    continue;
                };
                method.push(rm.mean_final());
                random.push(rr.mean_final());
                oracle.push(ro.mean_final());
                scores.push(BenchmarkScores {
                    method: rm.finals(),
                    random: rr.finals(),
                    oracle: ro.finals(),
                });
            }
            let agg = match aggregated_performance(&method, &random, &oracle, config.skip_degenerate) {
                Ok(a) => a,
                Err(Error::Degenerate(_)) if config.skip_degenerate => continue,
                Err(e) => return Err(e),
            };
            let used: Vec<BenchmarkScores> = agg.used.iter().map(|&j| scores[j].clone()).collect();
            let ci = aggregated_ci_half_width(&used, config.ci_resamples, mix_seed(config.seed, 0xA66 + m.id()))?;
            aggregate.push(AggregateRow {
                method: m,
                aggregated_performance: agg.value,
                ci_half_width: ci,
                benchmarks_used: agg.used.len(),
            });
        }
    }
    Ok(ExperimentReport {
        benchmarks,
        summary,
        aggregate,
        epsilon,
    })
}

pub fn run_experiment(inputs: &[(String, TransferMatrix)], config: &ExperimentConfig) -> Result<ExperimentReport> {
    if inputs.is_empty() {
        return Err(invalid("no input matrices"));
    }
    let mut benchmarks = Vec::with_capacity(inputs.len());
    for (name, m) in inputs {
        benchmarks.push(run_benchmark(name, m, config)?);
    }
    summarize(benchmarks, config)
}

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const AGGREGATE_CSV: &str = "aggregate.csv";
pub const EPSILON_CSV: &str = "epsilon.csv";
pub const ROUTING_CSV: &str = "routing.csv";
pub const SELECTIONS_CSV: &str = "selections.csv";

impl ExperimentReport {
    pub fn write_results(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "method", "matrix_id", "round", "performance"])?;
        for b in &self.benchmarks {
            for r in &b.methods {
                for (id, run) in r.runs.iter().enumerate() {
                    for (k, v) in run.trace.iter().enumerate() {
                        out.write_record([
                            b.name.as_str(),
                            r.method.as_str(),
                            &id.to_string(),
                            &(k + 1).to_string(),
                            &v.to_string(),
                        ])?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "method", "stat", "value", "ci_half_width"])?;
        for s in &self.summary {
            out.write_record([
                s.benchmark.as_str(),
                s.method.as_str(),
                s.stat,
                &s.value.to_string(),
                &s.ci_half_width.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_aggregate(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["method", "aggregated_performance", "ci_half_width"])?;
        for a in &self.aggregate {
            out.write_record([
                a.method.as_str(),
                &a.aggregated_performance.to_string(),
                &a.ci_half_width.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_epsilon(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "method", "epsilon", "round"])?;
        for e in &self.epsilon {
            out.write_record([
                e.benchmark.as_str(),
                e.method.as_str(),
                &e.epsilon.to_string(),
                &e.round.map(|r| r.to_string()).unwrap_or_default(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }

    /// Per-round branch taken by M/GP-MBTL.
    pub fn write_routing(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "matrix_id", "round", "task", "branch"])?;
        for b in &self.benchmarks {
            let Some(r) = b.method(Method::Mgp) else { continue };
            for (id, run) in r.runs.iter().enumerate() {
                for (k, (t, br)) in run.selected.iter().zip(&run.branches).enumerate() {
                    out.write_record([
                        b.name.as_str(),
                        &id.to_string(),
                        &(k + 1).to_string(),
                        &t.to_string(),
                        br.as_deref().unwrap_or(""),
                    ])?;
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_selections(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["benchmark", "method", "matrix_id", "round", "task"])?;
        for b in &self.benchmarks {
            for r in &b.methods {
                // Random runs average many sequences; none is representative.
                if r.method == Method::Random {
                    continue;
                }
                for (id, run) in r.runs.iter().enumerate() {
                    for (k, t) in run.selected.iter().enumerate() {
                        out.write_record([
                            b.name.as_str(),
                            r.method.as_str(),
                            &id.to_string(),
                            &(k + 1).to_string(),
                            &t.to_string(),
                        ])?;
                    }
                }
            }
        }
        out.flush()?;
        Ok(())
    }

    /// Writes every CSV into `dir`, creating it if needed.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        let open = |name: &str| fs::File::create(dir.join(name)).map(std::io::BufWriter::new);
        self.write_results(open(RESULTS_CSV)?)?;
        self.write_summary(open(SUMMARY_CSV)?)?;
        self.write_aggregate(open(AGGREGATE_CSV)?)?;
        self.write_epsilon(open(EPSILON_CSV)?)?;
        self.write_routing(open(ROUTING_CSV)?)?;
        self.write_selections(open(SELECTIONS_CSV)?)?;
        Ok(())
    }

    pub fn summary_value(&self, benchmark: &str, method: Method, stat: &str) -> Option<f64> {
        self.summary
            .iter()
            .find(|s| s.benchmark == benchmark && s.method == method && s.stat == stat)
            .map(|s| s.value)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{generate, preset};

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            methods: Method::ALL.to_vec(),
            rounds: Some(6),
            bootstrap: Some(BootstrapSpec { count: 6, seed: 2 }),
            random_repeats: 5,
            ci_resamples: 200,
            ..ExperimentConfig::default()
        }
    }

    fn small_matrix(name: &str) -> TransferMatrix {
        generate(&preset(name).unwrap()).unwrap()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.as_str().parse::<Method>().unwrap(), m);
        }
        assert!("oracle".parse::<Method>().is_err());
    }

    #[test]
    fn validation() {
        let mut c = small_config();
        assert_eq!(c.validate(27).unwrap(), 6);
        c.rounds = Some(28);
        assert!(c.validate(27).is_err());
        c.rounds = None;
        assert_eq!(c.validate(27).unwrap(), 27);
        c.methods = vec![];
        assert!(c.validate(27).is_err());
        c.methods = vec![Method::M, Method::M];
        assert!(c.validate(27).is_err());
    }

    #[test]
    fn cached_sequences_match_direct_runs() {
        let m = Arc::new(prepare(&small_matrix("3d/const-f/none-g/l1/sigma5/levels3"), &small_config()).unwrap());
        let c = small_config();
        let cached = run_method(&m, Method::M, 6, &c).unwrap();
        let oracle = run_method(&m, Method::MyopicOracle, 6, &c).unwrap();
        for w in 0..m.num_trials() {
            let direct = run_selector(&m, w, &mut MmbtlSelector::new(c.mmbtl.clone()), 6).unwrap();
            assert_eq!(cached.runs[w], MatrixRun::from(direct));
            let mut o = OracleSelector::myopic(m.clone());
            let direct = run_selector(&m, w, &mut o, 6).unwrap();
            assert_eq!(oracle.runs[w], MatrixRun::from(direct));
        }
    }

    #[test]
    fn report_endpoints_and_ordering() {
        let inputs = vec![
            ("a".to_string(), small_matrix("3d/const-f/none-g/l1/sigma5/levels3")),
            ("b".to_string(), small_matrix("3d/lin-f/lin-g/nondist/sigma5/levels3")),
        ];
        let c = small_config();
        let report = run_experiment(&inputs, &c).unwrap();
        let agg = |m| report.aggregate.iter().find(|a| a.method == m).unwrap();
        assert_eq!(agg(Method::Random).aggregated_performance, 0.0);
        assert_eq!(agg(Method::MyopicOracle).aggregated_performance, 1.0);
        assert_eq!(agg(Method::Random).ci_half_width, 0.0);
        for b in &report.benchmarks {
            for r in &b.methods {
                assert_eq!(r.runs.len(), 6);
                for run in &r.runs {
                    assert!(run.trace.windows(2).all(|w| w[1] >= w[0]));
                    assert!(run.trace.iter().all(|v| (0.0..=1.0).contains(v)));
                }
            }
            let mgp = b.method(Method::Mgp).unwrap();
            assert!(mgp.runs.iter().all(|r| r.branches.iter().all(Option::is_some)));
        }
        assert_eq!(report.summary.len(), 2 * 6 * 4);
        let mut first = Vec::new();
        report.write_summary(&mut first).unwrap();
        let again = run_experiment(&inputs, &c).unwrap();
        let mut second = Vec::new();
        again.write_summary(&mut second).unwrap();
        assert_eq!(first, second);
    }

    #[test]
    fn full_coverage_reaches_best() {
        let m = small_matrix("3d/const-f/none-g/nondist/sigma5/levels2");
        let c = ExperimentConfig {
            methods: vec![Method::Gp, Method::Random],
            rounds: None,
            bootstrap: None,
            random_repeats: 2,
            ci_resamples: 10,
            ..ExperimentConfig::default()
        };
        let b = run_benchmark("x", &m, &c).unwrap();
        let prepared = prepare(&m, &c).unwrap();
        for r in &b.methods {
            for (w, run) in r.runs.iter().enumerate() {
                let n = prepared.size();
                let best: f64 = (0..n)
                    .map(|y| (0..n).map(|x| prepared.get(w, x, y)).fold(f64::NEG_INFINITY, f64::max))
                    .sum::<f64>()
                    / n as f64;
                assert!((run.final_performance() - best).abs() < 1e-12);
            }
        }
    }
}
