use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const MINIMAL: &str = r#"
problem = "quadratic-pair"
algorithm = "gsmgrad"
alpha = 0.1
beta = 0.1
T = 200
seed = 1
"#;

fn gsmgrad(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gsmgrad"))
        .args(args)
        .current_dir(dir)
        .env_remove("GSMGRAD_OUTPUT_ROOT")
        .output()
        .unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout)))
}

fn write_config(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

#[test]
fn run_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "exp.toml", MINIMAL);
    let out = gsmgrad(dir.path(), &["run", "exp.toml"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let runs = json(&out);
    assert_eq!(runs[0]["seed"], 1);
    assert!(dir.path().join("runs/trace_seed1.csv").exists());
    assert!(dir.path().join("runs/summary.json").exists());
}

#[test]
fn output_root_env_redirects_relative_dirs() {
    let dir = tempfile::tempdir().unwrap();
    let root = tempfile::tempdir().unwrap();
    write_config(dir.path(), "exp.toml", &format!("{MINIMAL}output_dir = \"nested\"\n"));
    let out = Command::new(env!("CARGO_BIN_EXE_gsmgrad"))
        .args(["run", "exp.toml"])
        .current_dir(dir.path())
        .env("GSMGRAD_OUTPUT_ROOT", root.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(root.path().join("nested/trace_seed1.csv").exists());
    assert!(!dir.path().join("nested").exists());
}

#[test]
fn invalid_config_exits_with_validation_code() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "bad.toml", &MINIMAL.replace("alpha = 0.1", "alpha = -1.0"));
    let out = gsmgrad(dir.path(), &["run", "bad.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));

    write_config(dir.path(), "unknown.toml", &format!("{MINIMAL}learning_rate = 1\n"));
    let out = gsmgrad(dir.path(), &["run", "unknown.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("learning_rate"));

    let out = gsmgrad(dir.path(), &["run", "missing.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let out = gsmgrad(dir.path(), &["frobnicate"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn diverged_run_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "boom.toml",
        r#"
problem = "exp-pair"
algorithm = "gsmgrad"
alpha = 1000.0
beta = 0.1
T = 50
seed = 3
x0 = [3.0]
"#,
    );
    let out = gsmgrad(dir.path(), &["run", "boom.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)[0]["diverged"], true);
}

#[test]
fn verify_prints_passing_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsmgrad(dir.path(), &["verify", "subproblem"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["passed"], true);
    assert!(!report["checks"].as_array().unwrap().is_empty());

    let out = gsmgrad(dir.path(), &["verify", "everything"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn suggest_reports_step_sizes() {
    let dir = tempfile::tempdir().unwrap();
    let out = gsmgrad(dir.path(), &["suggest", "--epsilon", "0.1", "--regime", "det-average"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["suggestion"]["horizon"], 100);

    write_config(dir.path(), "exp.toml", MINIMAL);
    let out = gsmgrad(
        dir.path(),
        &[
            "suggest",
            "--epsilon",
            "0.1",
            "--regime",
            "det-iterwise",
            "--config",
            "exp.toml",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert!((v["scale"]["gradient_bound"].as_f64().unwrap() - 18f64.sqrt()).abs() < 1e-6);

    let out = gsmgrad(dir.path(), &["suggest", "--epsilon", "0", "--regime", "det-average"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_runs_every_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    write_config(dir.path(), "exp.toml", MINIMAL);
    let out = gsmgrad(
        dir.path(),
        &[
            "sweep",
            "exp.toml",
            "--grid",
            "alpha=0.05,0.1",
            "--grid",
            "params.c1=-2,-3",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let points = json(&out);
    assert_eq!(points.as_array().unwrap().len(), 4);
    assert!(dir.path().join("runs/alpha=0.05_params.c1=-3/trace_seed1.csv").exists());
}

#[test]
fn smoothness_scan_writes_samples() {
    let dir = tempfile::tempdir().unwrap();
    write_config(
        dir.path(),
        "exp.toml",
        r#"
problem = "exp-pair"
algorithm = "gsmgrad"
alpha = 0.001
beta = 0.0001
T = 300
seed = 1
x0 = [3.0]
"#,
    );
    assert_eq!(gsmgrad(dir.path(), &["run", "exp.toml"]).status.code(), Some(0));
    let out = gsmgrad(
        dir.path(),
        &["smoothness-scan", "runs/trace_seed1.csv", "--config", "exp.toml"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert!(v["samples"].as_u64().unwrap() > 100);
    let slope = v["fit"]["slope"].as_f64().unwrap();
    assert!((0.85..=1.15).contains(&slope), "slope {slope}");
    let csv = fs::read_to_string(dir.path().join("runs/trace_seed1_smoothness.csv")).unwrap();
    assert!(csv.starts_with("t,task,grad_norm,local_l"));
}

#[test]
fn help_and_version_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gsmgrad(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(gsmgrad(dir.path(), &["--version"]).status.code(), Some(0));
}
