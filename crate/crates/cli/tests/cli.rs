use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mbtl::{TaskGrid, TransferMatrix};

fn mbtl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mbtl")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, preset: &str) -> std::path::PathBuf {
    let out = dir.join("m.json");
    let o = mbtl(&["generate", "--preset", preset, "--seed", "1", "-o", path(&out)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn generate_writes_grid_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("m.json");
    let o = mbtl(&[
        "generate", "--preset", "3d/const-f/none-g/l1/sigma5", "--trials", "3", "--seed", "1", "-o",
        path(&out),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("N=512") && stdout.contains("dims=[8, 8, 8]") && stdout.contains("sigma=5"));
    let m = TransferMatrix::read_json(&out).unwrap();
    assert_eq!(m.grid().dims(), &[8, 8, 8]);
    assert_eq!(m.num_trials(), 3);
}

#[test]
fn generate_usage_errors() {
    let o = mbtl(&["generate", "--preset", "3d/const-f/none-g/l1"]);
    assert_eq!(o.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.json");
    let o = mbtl(&["generate", "--preset", "4d/nothing", "-o", path(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!out.exists());
    let o = mbtl(&["generate", "--list"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 24);
}

#[test]
fn run_rejects_too_many_rounds() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(dir.path(), "3d/const-f/none-g/l1/levels2");
    let o = mbtl(&["run", "-i", path(&m), "-K", "9", "-o", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rounds"));
    let o = mbtl(&["run", "-i", path(&m), "--methods", "m,best", "-o", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_matrix_reports_context() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"schema_version\": 1, \"name\": \"x\", \"dims\": [2]").unwrap();
    let o = mbtl(&["run", "-i", path(&bad), "-o", path(&dir.path().join("out"))]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("bad.json"));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(dir.path(), "3d/lin-f/none-g/nondist/levels3");
    let out = dir.path().join("out");
    let o = mbtl(&[
        "run", "-i", path(&m), "--bootstrap", "4", "--methods", "mgp,m,gp,random,myopic-oracle", "-K",
        "6", "--random-repeats", "3", "--ci-resamples", "100", "-o", path(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let results = fs::read_to_string(out.join("results.csv")).unwrap();
    assert!(results.starts_with("benchmark,method,matrix_id,round,performance\n"));
    assert_eq!(results.lines().count(), 1 + 5 * 4 * 6);
    let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert!(summary.starts_with("benchmark,method,stat,value,ci_half_width\n"));
    let aggregate = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    assert!(aggregate.contains("\nrandom,0,0\n"));
    assert!(aggregate.contains("\nmyopic-oracle,1,0\n"));
    let routing = fs::read_to_string(out.join("routing.csv")).unwrap();
    assert_eq!(routing.lines().count(), 1 + 4 * 6);
    let config: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(config["gp"]["beta"], 4.0);

    let agg = dir.path().join("agg.csv");
    let o = mbtl(&["report", "-i", path(&out.join("results.csv")), "--ci-resamples", "100", "-o", path(&agg)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&agg).unwrap();
    assert!(text.contains("\nrandom,0,0\n") && text.contains("\nmyopic-oracle,1,0\n"));
    // Same values as the aggregate written by `run`.
    let line = |t: &str, m: &str| t.lines().find(|l| l.starts_with(&format!("{m},"))).map(str::to_string);
    assert_eq!(
        line(&text, "mgp").unwrap().split(',').nth(1),
        line(&aggregate, "mgp").unwrap().split(',').nth(1)
    );

    // The routing log can be replayed through detection.
    let boot = dir.path().join("boot.json");
    let o = mbtl(&["bootstrap", "-i", path(&m), "--count", "4", "--normalize", "-o", path(&boot)]);
    assert!(o.status.success());
    let o = mbtl(&[
        "detect", "-i", path(&boot), "--routing", path(&out.join("routing.csv")), "--matrix-id", "1",
        "--trial", "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let reports: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 6);
}

#[test]
fn report_over_endpoints_only() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(dir.path(), "3d/const-f/none-g/l1/levels3");
    let out = dir.path().join("out");
    let o = mbtl(&[
        "run", "-i", path(&m), "--bootstrap", "3", "--methods", "random,myopic-oracle", "-K", "4",
        "--random-repeats", "2", "--ci-resamples", "50", "-o", path(&out),
    ]);
    assert!(o.status.success());
    let agg = dir.path().join("agg.csv");
    let o = mbtl(&["report", "-i", path(&out.join("results.csv")), "-o", path(&agg)]);
    assert!(o.status.success());
    assert_eq!(
        fs::read_to_string(&agg).unwrap(),
        "method,aggregated_performance,ci_half_width\nrandom,0,0\nmyopic-oracle,1,0\n"
    );
}

#[test]
fn decompose_constant_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let m = TransferMatrix::new("flat", TaskGrid::integer(&[2, 2]).unwrap(), vec![vec![0.4; 16]], false).unwrap();
    let input = dir.path().join("flat.json");
    m.write_json(&input).unwrap();
    let out = dir.path().join("d.csv");
    let summary = dir.path().join("s.json");
    let o = mbtl(&["decompose", "-i", path(&input), "-o", path(&out), "--summary", path(&summary)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut reader = csv::Reader::from_path(&out).unwrap();
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let v: f64 = rec[3].parse().unwrap();
        if &rec[0] == "C" {
            assert!((v - 0.4).abs() < 1e-15);
        } else {
            assert_eq!(v, 0.0, "{rec:?}");
        }
        rows += 1;
    }
    assert_eq!(rows, 1 + 4 + 4 + 16);
    assert!(summary.exists());
}

#[test]
fn detect_on_noiseless_mountain() {
    let dir = tempfile::tempdir().unwrap();
    let m = generate(dir.path(), "3d/const-f/none-g/l1/sigma0");
    let o = mbtl(&["detect", "-i", path(&m), "--selected", "219,7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["structure"], "MOUNTAIN");
    let o = mbtl(&["detect", "-i", path(&m), "--selected", "219,219"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn help_lists_defaults() {
    let o = mbtl(&["run", "--help"]);
    let text = String::from_utf8_lossy(&o.stdout);
    for needle in ["[default: 4]", "[default: 0.01]", "[default: N]", "[default: 100]", "[default: 10000]", "[default: 0.0001]"] {
        assert!(text.contains(needle), "missing {needle} in\n{text}");
    }
}
