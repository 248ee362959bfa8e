use std::path::Path;
use std::process::{Command, Output};

fn cesbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cesbound"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(path: &Path, text: &str) -> String {
    std::fs::write(path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(cesbound(&[]).status.code(), Some(1));
    assert_eq!(cesbound(&["bogus"]).status.code(), Some(1));
    assert_eq!(cesbound(&["mc", "fig1", "--runs", "ten"]).status.code(), Some(1));
    assert_eq!(cesbound(&["--help"]).status.code(), Some(0));
    assert_eq!(cesbound(&["--version"]).status.code(), Some(0));
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir.path().join("bad.toml"), "experiment = \"fig1\"\nl = 4\n");
    let out = cesbound(&["--config", &cfg, "bound", "cscrb"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
    let unknown = write(&dir.path().join("unknown.toml"), "experiment = \"fig1\"\nsnapshot = 3\n");
    assert_eq!(cesbound(&["--config", &unknown, "bound", "cscrb"]).status.code(), Some(1));
}

#[test]
fn bound_curves_print_csv() {
    for kind in ["cscrb", "sscrb"] {
        let out = cesbound(&["bound", kind]);
        assert_eq!(out.status.code(), Some(0), "{kind}");
        let text = stdout(&out);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("lambda,metric,value,stderr,runs,seed"));
        assert!(lines.count() > 5);
    }
}

#[test]
fn validate_exit_codes() {
    let out = cesbound(&["validate", "sscrb"]);
    assert_eq!(out.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], true);

    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("mismatch.toml"),
        "experiment = \"validate_sfim\"\nsample_lambda = 10.0\n",
    );
    let out = cesbound(&["--config", &cfg, "validate", "sfim"]);
    assert_eq!(out.status.code(), Some(2));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
}

#[test]
fn monte_carlo_outputs_are_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        &dir.path().join("fig1.toml"),
        "experiment = \"fig1\"\nn = 3\nl = 8\nlambda_grid = [2.0, 20.0]\n",
    );
    let mut csvs = Vec::new();
    for threads in ["1", "2"] {
        let path = dir.path().join(format!("out{threads}/fig1.csv"));
        let out = cesbound(&[
            "--config",
            &cfg,
            "--runs",
            "150",
            "--threads",
            threads,
            "--out",
            path.to_str().unwrap(),
            "mc",
            "fig1",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        assert!(out.stdout.is_empty());
        let sidecar: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(path.with_extension("json")).unwrap()).unwrap();
        assert_eq!(sidecar["config"]["runs"], 150);
        csvs.push(std::fs::read_to_string(&path).unwrap());
    }
    assert_eq!(csvs[0], csvs[1]);
    assert_eq!(csvs[0].lines().count(), 7);

    let piped = cesbound(&["--config", &cfg, "--runs", "150", "mc", "fig1"]);
    assert_eq!(stdout(&piped), csvs[0]);
    let reseeded = cesbound(&["--config", &cfg, "--runs", "150", "--seed", "7", "mc", "fig1"]);
    assert_ne!(stdout(&reseeded), csvs[0]);
}

#[test]
fn sample_emits_snapshots() {
    let out = cesbound(&["--seed", "3", "sample", "--lambda", "4", "--snapshots", "5"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("snapshot,sensor,re,im"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5 * 8);
    assert!(rows.iter().all(|r| r.len() == 4 && r[2].is_finite() && r[3].is_finite()));
    assert_eq!(stdout(&cesbound(&["--seed", "3", "sample", "--lambda", "4", "--snapshots", "5"])), text);
    assert_eq!(cesbound(&["sample", "--lambda", "1"]).status.code(), Some(1));
}
