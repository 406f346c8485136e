//! Experiment orchestration: configs, seeded multi-run execution, sweeps,
//! trace files and the verification suites.

pub mod config;
pub mod suggest;
pub mod trace;
pub mod verify;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::SmoothnessSample;
use crate::error::{Error, Result};
use crate::objectives::{splitmix64, ObjectiveProblem, ParamPoint};
use crate::optimizers::{run, RunOptions};
use crate::simplex::{random_weights, uniform_weights};

pub use config::{
    config_from_table, load_config, parse_config, parse_table, ExperimentConfig, InitialWeights, ProblemSpec,
    OUTPUT_ROOT_ENV,
};
pub use suggest::{suggest_hyperparams, HyperparamSuggestion, ProblemScale, Regime};
pub use trace::{parse_trace, read_trace, write_trace, RunSummary, TraceStats};
pub use verify::{verify, verify_lemmas_on, CheckResult, Suite, VerifyReport};

pub const SUMMARY_FILE: &str = "summary.json";

pub fn trace_file_name(seed: u64) -> String {
    format!("trace_seed{seed}.csv")
}

/// Contents of `summary.json`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub runs: Vec<RunSummary>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub output_dir: PathBuf,
    pub summary_path: PathBuf,
    pub summaries: Vec<RunSummary>,
}

impl ExperimentReport {
    pub fn any_diverged(&self) -> bool {
        self.summaries.iter().any(|s| s.diverged)
    }
}

fn ensure_writable(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Runs one seed and writes its trace into `dir`.
fn run_seed(config: &ExperimentConfig, problem: &ObjectiveProblem, seed: u64, dir: &Path) -> Result<RunSummary> {
    let started = Instant::now();
    let w0 = match config.w0 {
        InitialWeights::Uniform => uniform_weights(problem.num_tasks())?,
        InitialWeights::Random => {
            // Decorrelated from the noise stream, which is keyed on the raw seed.
            let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ 0x5EED_0F3E_1C47));
            random_weights(problem.num_tasks(), &mut rng)?
        }
    };
    let options = RunOptions {
        x0: config.x0.clone().map(ParamPoint::new).transpose()?,
        w0: Some(w0),
        record_every: config.record_every,
        ..RunOptions::default()
    };
    let optimizer = config.optimizer_for(seed);
    let noise = config.noise_for(seed);
    let outcome = run(problem, &optimizer, noise.as_ref(), &options)?;
    let trace = trace_file_name(seed);
    write_trace(&dir.join(&trace), &outcome.records, problem.dim(), problem.num_tasks())?;
    Ok(RunSummary {
        seed,
        stats: TraceStats::from_records(&outcome.records),
        iterations_completed: outcome.iterations_completed,
        diverged: outcome.diverged,
        error: outcome.error.map(|e| e.to_string()),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        trace,
    })
}

/// Runs every seed of `config` (concurrently), writing one CSV trace per
/// seed and a `summary.json` into the resolved output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    run_experiment_in(config, &config.resolved_output_dir())
}

/// As [`run_experiment`], writing into `dir` instead of the configured directory.
pub fn run_experiment_in(config: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    let problem = config.problem.build()?;
    ensure_writable(dir)?;
    let summaries = config
        .seeds
        .par_iter()
        .map(|&seed| run_seed(config, &problem.clone(), seed, dir))
        .collect::<Result<Vec<_>>>()?;
    let summary = ExperimentSummary {
        config: config.clone(),
        runs: summaries.clone(),
    };
    let summary_path = dir.join(SUMMARY_FILE);
    let json = serde_json::to_vec_pretty(&summary).map_err(|e| Error::Trace(e.to_string()))?;
    trace::write_atomic(&summary_path, &json)?;
    Ok(ExperimentReport {
        output_dir: dir.to_path_buf(),
        summary_path,
        summaries,
    })
}

/// One axis of a sweep grid: `key=v1,v2,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<toml::Value>,
    raw: Vec<String>,
}

impl std::str::FromStr for GridAxis {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("grid axis `{spec}` is not of the form key=v1,v2,...")))?;
        let key = key.trim();
        if key.is_empty() {
            return Err(Error::invalid(format!("grid axis `{spec}` has an empty key")));
        }
        let raw: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if raw.iter().any(String::is_empty) {
            return Err(Error::invalid(format!("grid axis `{spec}` has an empty value")));
        }
        let values = raw.iter().map(|v| parse_grid_value(v)).collect();
        Ok(GridAxis {
            key: key.to_string(),
            values,
            raw,
        })
    }
}

/// TOML literal if it parses as one, bare string otherwise.
fn parse_grid_value(text: &str) -> toml::Value {
    format!("v = {text}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_key(table: &mut toml::Table, key: &str, value: toml::Value) {
    // `params.c1` addresses the nested parameter table.
    match key.split_once('.') {
        Some((outer, inner)) => {
            let entry = table
                .entry(outer.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            if let toml::Value::Table(t) = entry {
                set_key(t, inner, value);
            }
        }
        None => {
            table.insert(key.to_string(), value);
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepPoint {
    /// Directory name of the grid point, e.g. `alpha=0.1_beta=0.01`.
    pub label: String,
    pub config: ExperimentConfig,
}

/// Expands the cartesian product of `axes` over `base`. Every point is
/// validated before anything runs.
pub fn expand_sweep(base: &toml::Table, axes: &[GridAxis]) -> Result<Vec<SweepPoint>> {
    let base_config = config_from_table(base)?;
    let mut points = vec![(Vec::<String>::new(), base.clone())];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for (labels, table) in &points {
            for (value, raw) in axis.values.iter().zip(&axis.raw) {
                let mut t = table.clone();
                set_key(&mut t, &axis.key, value.clone());
                let mut l = labels.clone();
                l.push(format!("{}={}", axis.key, raw.replace(['/', '\\'], "_")));
                next.push((l, t));
            }
        }
        points = next;
    }
    points
        .into_iter()
        .map(|(labels, mut table)| {
            let label = if labels.is_empty() {
                "base".to_string()
            } else {
                labels.join("_")
            };
            let dir = base_config.output_dir.join(&label);
            table.insert(
                "output_dir".into(),
                toml::Value::String(dir.to_string_lossy().into_owned()),
            );
            Ok(SweepPoint {
                config: config_from_table(&table)?,
                label,
            })
        })
        .collect()
}

/// Runs every point of a sweep in order.
pub fn run_sweep(base: &toml::Table, axes: &[GridAxis]) -> Result<Vec<(SweepPoint, ExperimentReport)>> {
    let points = expand_sweep(base, axes)?;
    for p in &points {
        ensure_writable(&p.config.resolved_output_dir())?;
    }
    points
        .into_iter()
        .map(|p| {
            let report = run_experiment(&p.config)?;
            Ok((p, report))
        })
        .collect()
}

/// Plot-ready CSV of a smoothness scan: `t,task,grad_norm,local_l`.
pub fn smoothness_samples_csv(samples: &[SmoothnessSample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Trace(e.to_string());
    w.write_record(["t", "task", "grad_norm", "local_l"]).map_err(err)?;
    for s in samples {
        w.write_record([
            s.t.to_string(),
            (s.task + 1).to_string(),
            format!("{:.16e}", s.grad_norm),
            format!("{:.16e}", s.local_l),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Trace(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
problem = "quadratic-pair"
algorithm = "gsmgrad"
alpha = 0.1
beta = 0.1
T = 50
seeds = [1, 2, 3]
record_every = 5
"#;

    #[test]
    fn three_seeds_write_three_traces_and_a_summary() {
        let dir = tempfile::tempdir().unwrap();
        let config = parse_config(BASE).unwrap();
        let report = run_experiment_in(&config, dir.path()).unwrap();
        assert_eq!(report.summaries.len(), 3);
        for seed in [1, 2, 3] {
            assert!(dir.path().join(trace_file_name(seed)).is_file());
        }
        let summary: ExperimentSummary = serde_json::from_slice(&std::fs::read(&report.summary_path).unwrap()).unwrap();
        assert_eq!(summary.runs.len(), 3);
        assert_eq!(summary.runs.iter().map(|r| r.seed).collect::<Vec<_>>(), vec![1, 2, 3]);
    }

    #[test]
    fn summaries_are_recomputable_from_traces() {
        let dir = tempfile::tempdir().unwrap();
        let config = parse_config(BASE).unwrap();
        let report = run_experiment_in(&config, dir.path()).unwrap();
        for s in &report.summaries {
            let records = read_trace(&dir.path().join(&s.trace)).unwrap();
            assert_eq!(TraceStats::from_records(&records), s.stats);
        }
    }

    #[test]
    fn unwritable_output_is_an_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let config = parse_config(BASE).unwrap();
        let err = run_experiment_in(&config, &blocker.join("sub")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }), "{err}");
    }

    #[test]
    fn grid_axes_parse() {
        let axis: GridAxis = "alpha=0.1, 0.2".parse().unwrap();
        assert_eq!(axis.key, "alpha");
        assert_eq!(axis.values, vec![toml::Value::Float(0.1), toml::Value::Float(0.2)]);
        let axis: GridAxis = "algorithm=gsmgrad,gsmgrad-fa".parse().unwrap();
        assert_eq!(axis.values[1], toml::Value::String("gsmgrad-fa".into()));
        assert!("alpha".parse::<GridAxis>().is_err());
        assert!("alpha=0.1,".parse::<GridAxis>().is_err());
    }

    #[test]
    fn sweep_is_a_cartesian_product() {
        let base = parse_table(BASE).unwrap();
        let axes: Vec<GridAxis> = vec!["alpha=0.1,0.2".parse().unwrap(), "params.c1=-2,-3".parse().unwrap()];
        let points = expand_sweep(&base, &axes).unwrap();
        assert_eq!(points.len(), 4);
        assert_eq!(points[3].label, "alpha=0.2_params.c1=-3");
        assert_eq!(points[3].config.optimizer.alpha, 0.2);
        assert_eq!(points[3].config.problem.params["c1"], -3.0);
        assert!(points[0].config.output_dir.ends_with("alpha=0.1_params.c1=-2"));
    }

    #[test]
    fn invalid_sweep_points_fail_before_running() {
        let base = parse_table(BASE).unwrap();
        let axes = vec!["alpha=0.1,-1".parse().unwrap()];
        assert!(matches!(expand_sweep(&base, &axes), Err(Error::Config { .. })));
    }

    #[test]
    fn random_initial_weights_depend_on_seed() {
        let dir = tempfile::tempdir().unwrap();
        let config = parse_config(&format!("{BASE}\nw0 = \"random\"\n")).unwrap();
        run_experiment_in(&config, dir.path()).unwrap();
        let first = |seed| {
            read_trace(&dir.path().join(trace_file_name(seed))).unwrap()[0]
                .w
                .clone()
        };
        assert_ne!(first(1), first(2));
    }
}
