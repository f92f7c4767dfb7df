use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};

use mbtl::cluster::{MmbtlConfig, DEFAULT_MAX_ITERATIONS, DEFAULT_SLOPE};
use mbtl::decomposition::{component_summary, decompose};
use mbtl::detection::{detect_report, DetectionConfig, ObservedHistory, SlopeConvention};
use mbtl::eval::{
    aggregated_ci_half_width, aggregated_performance, bootstrap, BenchmarkScores, BootstrapSpec,
    DEFAULT_BOOTSTRAP_COUNT, DEFAULT_CI_RESAMPLES,
};
use mbtl::experiment::{run_experiment, ExperimentConfig, Method, DEFAULT_RANDOM_REPEATS};
use mbtl::gp::GpHyperparameters;
use mbtl::gp_select::{AcquisitionMode, GpMbtlConfig, DEFAULT_BETA};
use mbtl::synthetic::{generate, preset, preset_names};
use mbtl::{min_max_normalize, DistanceWeights, TransferMatrix};

#[derive(Parser)]
#[command(name = "mbtl", version, about = "Select source tasks from zero-shot transfer matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic transfer-matrix dataset from a preset
    Generate(GenerateArgs),
    /// Resample matrix rows with replacement across trials
    Bootstrap(BootstrapArgs),
    /// Run selection methods and write result CSVs
    Run(RunArgs),
    /// Split a matrix into grand mean, policy quality, task difficulty and dissimilarity
    Decompose(DecomposeArgs),
    /// Test observed rows for the Mountain structure
    Detect(DetectArgs),
    /// Aggregate performance across benchmarks from result CSVs
    Report(ReportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Preset identifier, e.g. 3d/const-f/none-g/l1/sigma5 (see --list)
    #[arg(long, required_unless_present = "list")]
    preset: Option<String>,
    /// Number of independent trials
    #[arg(long, default_value_t = 3)]
    trials: usize,
    /// Noise seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output JSON path
    #[arg(short, long, required_unless_present = "list")]
    output: Option<PathBuf>,
    /// Print the preset identifiers and exit
    #[arg(long)]
    list: bool,
}

#[derive(Args)]
struct BootstrapArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Number of bootstrapped matrices
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_COUNT)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Min-max normalize over all trials before resampling
    #[arg(long)]
    normalize: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Convention {
    Decreasing,
    SignEquality,
}

#[derive(Clone, Copy, ValueEnum)]
enum Acquisition {
    Observed,
    Modeled,
}

#[derive(Args)]
struct RunArgs {
    /// Input matrix JSON; repeat for several benchmarks
    #[arg(short, long, required = true)]
    input: Vec<PathBuf>,
    /// Comma-separated subset of mgp, m, gp, random, myopic-oracle, sequential-oracle
    #[arg(long, value_delimiter = ',', default_value = "mgp,m,gp,random,myopic-oracle")]
    methods: Vec<String>,
    /// Decision rounds K [default: N]
    #[arg(short = 'K', long = "rounds")]
    rounds: Option<usize>,
    /// Bootstrapped matrices per benchmark; 0 runs on the input trials as-is
    #[arg(long, default_value_t = DEFAULT_BOOTSTRAP_COUNT)]
    bootstrap: usize,
    /// Seed for bootstrapping, M-MBTL sampling and confidence intervals
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Skip min-max normalization
    #[arg(long)]
    no_normalize: bool,
    /// GP-MBTL exploration coefficient beta
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    /// L1 slope per dimension for M-MBTL distances and the initial GP-MBTL gap model
    #[arg(long, default_value_t = DEFAULT_SLOPE)]
    slope: f64,
    /// M-MBTL starting points M [default: N]
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = DEFAULT_MAX_ITERATIONS)]
    max_iterations: usize,
    /// Recompute every M-MBTL candidate each round instead of reusing cached ones
    #[arg(long)]
    no_fast_update: bool,
    /// GP signal variance
    #[arg(long, default_value_t = 1.0)]
    gp_signal_variance: f64,
    /// GP RBF length scale, in grid steps
    #[arg(long, default_value_t = 1.0)]
    gp_length_scale: f64,
    /// GP observation noise variance
    #[arg(long, default_value_t = 1e-4)]
    gp_noise: f64,
    /// Keep the initial gap slope instead of relearning it each round
    #[arg(long)]
    no_learn_slopes: bool,
    #[arg(long, value_enum, default_value = "observed")]
    acquisition: Acquisition,
    #[arg(long, value_enum, default_value = "decreasing")]
    slope_convention: Convention,
    /// Repeats averaged per matrix for the random baseline
    #[arg(long, default_value_t = DEFAULT_RANDOM_REPEATS)]
    random_repeats: usize,
    /// Bootstrap resamples B for confidence intervals
    #[arg(long, default_value_t = DEFAULT_CI_RESAMPLES)]
    ci_resamples: usize,
    /// Comma-separated epsilons for the suboptimality table
    #[arg(long, value_delimiter = ',', default_value = "0.01,0.005,0.001")]
    epsilon: Vec<f64>,
    /// Fail instead of skipping benchmarks where oracle equals random
    #[arg(long)]
    strict_aggregate: bool,
    /// Output directory
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(short, long)]
    input: PathBuf,
    /// Trial to decompose [default: mean over trials]
    #[arg(long)]
    trial: Option<usize>,
    /// Output CSV (component, i, j, value)
    #[arg(short, long)]
    output: PathBuf,
    /// Also write component standard deviations and marginals as JSON
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    #[arg(short, long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0)]
    trial: usize,
    /// Comma-separated selected tasks, in selection order
    #[arg(long, value_delimiter = ',', conflicts_with = "routing", required_unless_present = "routing")]
    selected: Vec<usize>,
    /// Routing CSV from `run`; detection is repeated on every prefix
    #[arg(long)]
    routing: Option<PathBuf>,
    /// Benchmark to read from the routing log [default: first one]
    #[arg(long)]
    benchmark: Option<String>,
    /// Matrix id to read from the routing log
    #[arg(long, default_value_t = 0)]
    matrix_id: usize,
    #[arg(long, value_enum, default_value = "decreasing")]
    slope_convention: Convention,
    /// Output JSON [default: stdout]
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportArgs {
    /// results.csv files written by `run`
    #[arg(short, long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_CI_RESAMPLES)]
    ci_resamples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (method, aggregated_performance, ci_half_width)
    #[arg(short, long)]
    output: PathBuf,
}

fn usage_error(msg: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, msg).exit()
}

fn convention(c: Convention) -> SlopeConvention {
    match c {
        Convention::Decreasing => SlopeConvention::Decreasing,
        Convention::SignEquality => SlopeConvention::SignEquality,
    }
}

fn read_matrix(path: &Path) -> Result<TransferMatrix> {
    TransferMatrix::read_json(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: Option<&Path>, value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn cmd_generate(a: GenerateArgs) -> Result<()> {
    if a.list {
        for name in preset_names() {
            println!("{name}");
        }
        return Ok(());
    }
    let name = a.preset.expect("required by clap");
    let output = a.output.expect("required by clap");
    let mut config = preset(&name).unwrap_or_else(|e| usage_error(e));
    config.trials = a.trials;
    config.seed = a.seed;
    config.validate().unwrap_or_else(|e| usage_error(e));
    let matrix = generate(&config)?.with_name(name.clone());
    matrix
        .write_json(&output)
        .with_context(|| format!("writing {}", output.display()))?;
    println!(
        "{name}: N={} D={} dims={:?} trials={} sigma={}",
        matrix.size(),
        matrix.grid().ndim(),
        matrix.grid().dims(),
        matrix.num_trials(),
        config.noise_sigma
    );
    Ok(())
}

fn cmd_bootstrap(a: BootstrapArgs) -> Result<()> {
    if a.count == 0 {
        usage_error("--count must be positive");
    }
    let mut m = read_matrix(&a.input)?;
    if a.normalize && !m.is_normalized() {
        m = min_max_normalize(&m)?;
    }
    let out = bootstrap(&m, &BootstrapSpec { count: a.count, seed: a.seed })?;
    out.write_json(&a.output)
        .with_context(|| format!("writing {}", a.output.display()))?;
    println!("{}: {} bootstrapped matrices of size {}", out.name(), out.num_trials(), out.size());
    Ok(())
}

fn benchmark_name(path: &Path, m: &TransferMatrix) -> String {
    if m.name().is_empty() {
        path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    } else {
        m.name().to_string()
    }
}

fn cmd_run(a: RunArgs) -> Result<()> {
    let methods: Vec<Method> = a
        .methods
        .iter()
        .map(|s| s.trim().parse().unwrap_or_else(|e| usage_error(e)))
        .collect();
    let mut inputs: Vec<(String, TransferMatrix)> = Vec::new();
    for path in &a.input {
        let m = read_matrix(path)?;
        let mut name = benchmark_name(path, &m);
        if inputs.iter().any(|(n, _)| *n == name) {
            name = format!("{name}#{}", inputs.len());
        }
        inputs.push((name, m));
    }
    let grid = inputs[0].1.grid().clone();
    let weights = DistanceWeights::uniform(grid.ndim(), a.slope).unwrap_or_else(|e| usage_error(e));
    let config = ExperimentConfig {
        methods,
        rounds: a.rounds,
        bootstrap: (a.bootstrap > 0).then_some(BootstrapSpec {
            count: a.bootstrap,
            seed: a.seed,
        }),
        normalize: !a.no_normalize,
        mmbtl: MmbtlConfig {
            weights: Some(weights),
            num_samples: a.samples,
            max_iterations: a.max_iterations,
            seed: a.seed,
            fast_update: !a.no_fast_update,
        },
        gp: GpMbtlConfig {
            beta: a.beta,
            initial_gap_slope: a.slope,
            gp: GpHyperparameters {
                signal_variance: a.gp_signal_variance,
                length_scale: a.gp_length_scale,
                noise_variance: a.gp_noise,
            },
            acquisition: match a.acquisition {
                Acquisition::Observed => AcquisitionMode::Observed,
                Acquisition::Modeled => AcquisitionMode::Modeled,
            },
            learn_slopes: !a.no_learn_slopes,
        },
        detection: DetectionConfig {
            convention: convention(a.slope_convention),
        },
        random_repeats: a.random_repeats,
        ci_resamples: a.ci_resamples,
        seed: a.seed,
        epsilons: a.epsilon,
        skip_degenerate: !a.strict_aggregate,
    };
    for (name, m) in &inputs {
        if m.grid() != &grid {
            usage_error(format!("benchmark {name} has a different task grid than the first input"));
        }
        if let Err(e) = config.validate(m.size()) {
            usage_error(format!("{name}: {e}"));
        }
    }
    let report = run_experiment(&inputs, &config)?;
    report
        .write_dir(&a.output)
        .with_context(|| format!("writing results to {}", a.output.display()))?;
    write_json(Some(&a.output.join("config.json")), &config)?;
    for s in report.summary.iter().filter(|s| s.stat == "mean") {
        println!(
            "{:<40} {:<18} {:.4} ± {:.4}",
            s.benchmark, s.method, s.value, s.ci_half_width
        );
    }
    for g in &report.aggregate {
        println!("aggregate {:<18} {:.4} ± {:.4}", g.method, g.aggregated_performance, g.ci_half_width);
    }
    Ok(())
}

fn cmd_decompose(a: DecomposeArgs) -> Result<()> {
    let m = read_matrix(&a.input)?;
    let values = match a.trial {
        Some(w) if w >= m.num_trials() => {
            usage_error(format!("--trial {w} out of range (matrix has {} trials)", m.num_trials()))
        }
        Some(w) => m.trial(w).to_vec(),
        None => m.mean_trial(),
    };
    let d = decompose(&values)?;
    let file = fs::File::create(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    d.write_csv(std::io::BufWriter::new(file))?;
    if let Some(p) = &a.summary {
        write_json(Some(p), &component_summary(&d, m.grid().dims())?)?;
    }
    println!("C = {}", d.c);
    Ok(())
}

/// Tasks of one matrix from a routing CSV, ordered by round.
fn routing_tasks(path: &Path, benchmark: Option<&str>, matrix_id: usize) -> Result<Vec<usize>> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let mut chosen: Option<String> = benchmark.map(str::to_string);
    let mut rows: Vec<(usize, usize)> = Vec::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec.with_context(|| format!("{}: record {}", path.display(), line + 1))?;
        if rec.len() < 4 {
            bail!("{}: record {} has {} fields, expected 5", path.display(), line + 1, rec.len());
        }
        let name = chosen.get_or_insert_with(|| rec[0].to_string());
        if rec[0] != **name {
            continue;
        }
        let field = |i: usize| -> Result<usize> {
            rec[i]
                .parse()
                .with_context(|| format!("{}: record {} field {}", path.display(), line + 1, i + 1))
        };
        if field(1)? == matrix_id {
            rows.push((field(2)?, field(3)?));
        }
    }
    if rows.is_empty() {
        bail!("{}: no rounds for matrix {matrix_id}", path.display());
    }
    rows.sort();
    Ok(rows.into_iter().map(|(_, t)| t).collect())
}

fn cmd_detect(a: DetectArgs) -> Result<()> {
    let m = read_matrix(&a.input)?;
    if a.trial >= m.num_trials() {
        usage_error(format!("--trial {} out of range (matrix has {} trials)", a.trial, m.num_trials()));
    }
    let config = DetectionConfig {
        convention: convention(a.slope_convention),
    };
    let (tasks, per_prefix) = match &a.routing {
        Some(p) => (routing_tasks(p, a.benchmark.as_deref(), a.matrix_id)?, true),
        None => (a.selected.clone(), false),
    };
    let mut history = ObservedHistory::empty(m.grid().clone());
    let mut reports = Vec::new();
    for &t in &tasks {
        if t >= m.size() {
            usage_error(format!("task {t} out of range (N = {})", m.size()));
        }
        history
            .push(t, m.row(a.trial, t).to_vec())
            .unwrap_or_else(|e| usage_error(e));
        if per_prefix {
            reports.push(detect_report(&history, &config));
        }
    }
    if per_prefix {
        write_json(a.output.as_deref(), &reports)
    } else {
        let r = detect_report(&history, &config);
        eprintln!("{}", r.structure);
        write_json(a.output.as_deref(), &r)
    }
}

fn cmd_report(a: ReportArgs) -> Result<()> {
    // benchmark -> method -> matrix -> (last round, performance)
    let mut finals: BTreeMap<String, BTreeMap<String, BTreeMap<usize, (usize, f64)>>> = BTreeMap::new();
    for path in &a.input {
        let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.with_context(|| format!("{}: record {}", path.display(), line + 1))?;
            if rec.len() != 5 {
                bail!("{}: record {} has {} fields, expected 5", path.display(), line + 1, rec.len());
            }
            let ctx = |i: usize| format!("{}: record {} field {}", path.display(), line + 1, i + 1);
            let id: usize = rec[2].parse().with_context(|| ctx(3))?;
            let round: usize = rec[3].parse().with_context(|| ctx(4))?;
            let perf: f64 = rec[4].parse().with_context(|| ctx(5))?;
            let slot = finals
                .entry(rec[0].to_string())
                .or_default()
                .entry(rec[1].to_string())
                .or_default()
                .entry(id)
                .or_insert((0, f64::NAN));
            if round >= slot.0 {
                *slot = (round, perf);
            }
        }
    }
    let values = |b: &BTreeMap<String, BTreeMap<usize, (usize, f64)>>, m: &str| -> Option<Vec<f64>> {
        b.get(m).map(|r| r.values().map(|v| v.1).collect())
    };
    let mut methods: Vec<String> = finals.values().flat_map(|b| b.keys().cloned()).collect();
    methods.sort_by_key(|m| m.parse::<Method>().map(|x| x as usize).unwrap_or(usize::MAX));
    methods.dedup();
    let mut out = csv::Writer::from_path(&a.output).with_context(|| format!("writing {}", a.output.display()))?;
    out.write_record(["method", "aggregated_performance", "ci_half_width"])?;
    for method in &methods {
        let mut scores = Vec::new();
        for (name, b) in &finals {
            let (Some(m), Some(r), Some(o)) = (
                values(b, method),
                values(b, Method::Random.as_str()),
                values(b, Method::MyopicOracle.as_str()),
            ) else {
                continue;
            };
            if m.len() != r.len() || m.len() != o.len() {
                bail!("{name}: methods cover different numbers of matrices");
            }
            scores.push(BenchmarkScores { method: m, random: r, oracle: o });
        }
        if scores.is_empty() {
            bail!("aggregation needs random and myopic-oracle results for at least one benchmark");
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let agg = aggregated_performance(
            &scores.iter().map(|s| mean(&s.method)).collect::<Vec<_>>(),
            &scores.iter().map(|s| mean(&s.random)).collect::<Vec<_>>(),
            &scores.iter().map(|s| mean(&s.oracle)).collect::<Vec<_>>(),
            true,
        )?;
        let used: Vec<BenchmarkScores> = agg.used.iter().map(|&j| scores[j].clone()).collect();
        let ci = aggregated_ci_half_width(&used, a.ci_resamples, a.seed)?;
        out.write_record([method.as_str(), &agg.value.to_string(), &ci.to_string()])?;
        println!("{method:<18} {:.4} ± {:.4}", agg.value, ci);
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Bootstrap(a) => cmd_bootstrap(a),
        Command::Run(a) => cmd_run(a),
        Command::Decompose(a) => cmd_decompose(a),
        Command::Detect(a) => cmd_detect(a),
        Command::Report(a) => cmd_report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
