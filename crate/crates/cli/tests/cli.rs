use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;
use tempfile::TempDir;

const TOKEN_C5: &str = r#"{"type": "token", "graph": {"kind": "cycle", "n": 5}, "B": 5, "seed": 4}"#;
const IDENTITY: &str = r#"{"type": "static", "matrix": [[1, 0, 0], [0, 1, 0], [0, 0, 1]]}"#;
const AVERAGING: &str = r#"{"type": "static", "matrix": [[0.5, 0.5], [0.5, 0.5]]}"#;

struct Run {
    code: i32,
    out: PathBuf,
    stderr: String,
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

fn avgopt(dir: &TempDir, cmd: &str, config: &str, extra: &[&str]) -> Run {
    let cfg = write_config(dir.path(), config);
    let out = dir.path().join("out");
    let output = Command::new(env!("CARGO_BIN_EXE_avgopt"))
        .arg(cmd)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(extra)
        .output()
        .unwrap();
    Run {
        code: output.status.code().unwrap(),
        out,
        stderr: String::from_utf8_lossy(&output.stderr).into_owned(),
    }
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn column(csv: &str, idx: usize) -> Vec<f64> {
    csv.lines().skip(1).map(|l| l.split(',').nth(idx).unwrap().parse().unwrap()).collect()
}

fn median_config(horizon: usize, seeds: &str) -> String {
    format!(
        r#"{{
        "chain": {TOKEN_C5},
        "objectives": [{{"type": "abs", "a": [-2]}}, {{"type": "abs", "a": [-1]}}, {{"type": "abs", "a": [0]}},
                       {{"type": "abs", "a": [1]}}, {{"type": "abs", "a": [2]}}],
        "schedule": {{"K": 1, "beta": 0.75}},
        "x0": [[-2], [-1], [0], [1], [2]],
        "horizon": {horizon},
        "seeds": {seeds},
        "record_every": 100,
        "audits": {{"lyapunov": true}},
        "success": {{}}
    }}"#
    )
}

#[test]
fn verify_chain_exit_codes() {
    let dir = TempDir::new().unwrap();
    let ok = avgopt(&dir, "verify-chain", &format!(r#"{{"chain": {TOKEN_C5}, "horizon": 10}}"#), &[]);
    assert_eq!(ok.code, 0, "{}", ok.stderr);
    let report = json(&ok.out.join("assumptions.json"));
    assert_eq!(report["b_connectivity_ok"], true);
    assert_eq!(report["source"], "analytic");

    let dir = TempDir::new().unwrap();
    let bad = avgopt(&dir, "verify-chain", &format!(r#"{{"chain": {IDENTITY}, "horizon": 10}}"#), &["--trials", "3"]);
    assert_eq!(bad.code, 1);
    assert_eq!(json(&bad.out.join("assumptions.json"))["b_connectivity_ok"], false);

    let dir = TempDir::new().unwrap();
    assert_eq!(avgopt(&dir, "verify-chain", "{\"chain\": ", &[]).code, 2);
    let dir = TempDir::new().unwrap();
    let unknown = format!(r#"{{"chain": {TOKEN_C5}, "horizon": 10, "horizn": 3}}"#);
    assert_eq!(avgopt(&dir, "verify-chain", &unknown, &[]).code, 2);
}

#[test]
fn consensus_outputs() {
    let dir = TempDir::new().unwrap();
    let run = avgopt(&dir, "consensus", &format!(r#"{{"chain": {TOKEN_C5}, "horizon": 10}}"#), &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let csv = fs::read_to_string(run.out.join("consensus_seed0.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,d_x"));
    assert_eq!(csv.lines().count(), 11);
    let d = column(&csv, 1);
    assert!(d.iter().all(|v| *v > 0.0));
    assert!(d.windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(column(&csv, 0), (1..=10).map(f64::from).collect::<Vec<_>>());

    let dir = TempDir::new().unwrap();
    let run = avgopt(&dir, "consensus", &format!(r#"{{"chain": {AVERAGING}, "horizon": 5}}"#), &["--trials", "2"]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let csv = fs::read_to_string(run.out.join("consensus_seed1.csv")).unwrap();
    assert_eq!(column(&csv, 1)[0], 0.0);
    let pooled = fs::read_to_string(run.out.join("consensus_pooled.csv")).unwrap();
    assert_eq!(pooled.lines().next(), Some("t,value,se"));
}

#[test]
fn consensus_rejects_objectives() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(r#"{{"chain": {AVERAGING}, "horizon": 5, "objectives": [{{"type": "abs", "a": [0]}}]}}"#);
    assert_eq!(avgopt(&dir, "consensus", &cfg, &[]).code, 2);
}

#[test]
fn optimize_median_experiment() {
    let dir = TempDir::new().unwrap();
    let run = avgopt(&dir, "optimize", &median_config(20_000, "[1, 2, 3]"), &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let summary = json(&run.out.join("summary.json"));
    assert_eq!(summary["oracle"]["f_star"], 6.0);
    assert_eq!(summary["pass"], true);
    assert_eq!(summary["lyapunov"]["passed"], true);
    assert_eq!(summary["convergence"]["converged"], 3);
    let csv = fs::read_to_string(run.out.join("optimize_seed2.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,d_x,f_gap,alpha,dist_to_opt"));
    assert_eq!(csv.lines().count(), 202);
}

#[test]
fn optimize_with_zero_horizon_keeps_initial_state() {
    let dir = TempDir::new().unwrap();
    let run = avgopt(&dir, "optimize", &median_config(0, "[0]"), &[]);
    let csv = fs::read_to_string(run.out.join("optimize_seed0.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert_eq!(column(&csv, 2), vec![0.0]);
    assert_eq!(column(&csv, 4), vec![2.0]);
}

#[test]
fn optimize_missing_objective_is_config_error() {
    let dir = TempDir::new().unwrap();
    let cfg = median_config(10, "[0]").replace(r#",
                       {"type": "abs", "a": [1]}, {"type": "abs", "a": [2]}"#, r#", {"type": "abs", "a": [1]}"#);
    serde_json::from_str::<Value>(&cfg).unwrap();
    let run = avgopt(&dir, "optimize", &cfg, &[]);
    assert_eq!(run.code, 2, "{}", run.stderr);
    assert!(run.stderr.contains("dimension mismatch"), "{}", run.stderr);
}

#[test]
fn estimate_rate_cases() {
    let dir = TempDir::new().unwrap();
    let cfg = format!(r#"{{"chain": {TOKEN_C5}, "horizon": 1, "decay": {{"t_max": 150, "trials": 40, "joint": [[[0, 20], [10, 40]]]}}}}"#);
    let run = avgopt(&dir, "estimate-rate", &cfg, &[]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let report = json(&run.out.join("decay.json"));
    assert!(report["decay"]["fitted_lambda"].as_f64().unwrap() < 1.0);
    assert_eq!(report["joint"][0]["within_bound"], true);
    assert_eq!(fs::read_to_string(run.out.join("decay.csv")).unwrap().lines().count(), 151);

    let dir = TempDir::new().unwrap();
    let cfg = format!(r#"{{"chain": {IDENTITY}, "horizon": 1, "decay": {{"t_max": 20, "trials": 30}}}}"#);
    assert_eq!(avgopt(&dir, "estimate-rate", &cfg, &[]).code, 1);

    let dir = TempDir::new().unwrap();
    let cfg = format!(r#"{{"chain": {TOKEN_C5}, "horizon": 1}}"#);
    assert_eq!(avgopt(&dir, "estimate-rate", &cfg, &["--trials", "5"]).code, 2);
}

#[test]
fn reruns_are_byte_identical_apart_from_metadata() {
    let cfg = median_config(2_000, "[0, 1]");
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    let ra = avgopt(&a, "optimize", &cfg, &[]);
    let rb = avgopt(&b, "optimize", &cfg, &[]);
    let mut names: Vec<_> = fs::read_dir(&ra.out).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "meta.json"));
    for name in names.iter().filter(|n| *n != "meta.json") {
        assert_eq!(fs::read(ra.out.join(name)).unwrap(), fs::read(rb.out.join(name)).unwrap(), "{name:?}");
    }

    let c = TempDir::new().unwrap();
    let rc = avgopt(&c, "optimize", &cfg, &["--seed-offset", "7"]);
    assert!(rc.out.join("optimize_seed7.csv").exists());
    assert!(!rc.out.join("optimize_seed0.csv").exists());
}

#[test]
fn output_directory_is_required() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"chain": {TOKEN_C5}, "horizon": 5}}"#));
    let status = Command::new(env!("CARGO_BIN_EXE_avgopt"))
        .args(["consensus", "--config"])
        .arg(&cfg)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let status = Command::new(env!("CARGO_BIN_EXE_avgopt")).arg("consensus").status().unwrap();
    assert_eq!(status.code(), Some(2));
}
