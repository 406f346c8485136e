use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use gsmgrad_core::diagnostics::{fit_line, local_smoothness_scan};
use gsmgrad_core::harness::{
    self, load_config, parse_table, read_trace, run_experiment, suggest_hyperparams, verify, GridAxis, ProblemScale,
    Regime, Suite,
};
use gsmgrad_core::ParamPoint;

const EXIT_VALIDATION: u8 = 1;
const EXIT_DIVERGED: u8 = 2;
const EXIT_VERIFY_FAILED: u8 = 3;

/// Conflict-avoidant multi-objective gradient methods: runs, sweeps and checks.
#[derive(Parser)]
#[command(name = "gsmgrad", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config; writes one CSV trace per seed and summary.json.
    Run { config: PathBuf },
    /// Run the cartesian product of config edits, one subdirectory per point.
    Sweep {
        config: PathBuf,
        /// `key=v1,v2,...`; repeat for more axes. `params.NAME` edits a problem parameter.
        #[arg(long = "grid", required = true)]
        grid: Vec<String>,
    },
    /// Run a verification suite and print a JSON report.
    Verify {
        /// simplex, subproblem, lemmas, optimizers or all
        suite: String,
    },
    /// Suggest step sizes for a target accuracy.
    Suggest {
        #[arg(long)]
        epsilon: f64,
        /// det-average, det-iterwise, stoch-average or stoch-iterwise
        #[arg(long)]
        regime: String,
        /// Derive the gradient scale from this experiment's problem and start.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Local smoothness versus gradient norm along a trace.
    SmoothnessScan {
        trace: PathBuf,
        /// Config the trace was produced with (identifies the problem).
        #[arg(long)]
        config: PathBuf,
        /// Where to write the samples CSV; defaults to `<trace>_smoothness.csv`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        // a closed pipe (`| head`) is not an error
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

fn cmd_run(config: &Path) -> Result<u8> {
    let config = load_config(config)?;
    let report = run_experiment(&config)?;
    print_json(&report.summaries)?;
    eprintln!("wrote {}", report.summary_path.display());
    Ok(if report.any_diverged() { EXIT_DIVERGED } else { 0 })
}

fn cmd_sweep(config: &Path, grid: &[String]) -> Result<u8> {
    let text = std::fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let base = parse_table(&text)?;
    let axes = grid
        .iter()
        .map(|g| g.parse::<GridAxis>())
        .collect::<Result<Vec<_>, _>>()?;
    let results = harness::run_sweep(&base, &axes)?;
    let mut diverged = false;
    let listing: Vec<_> = results
        .iter()
        .map(|(point, report)| {
            diverged |= report.any_diverged();
            serde_json::json!({
                "point": point.label,
                "output_dir": report.output_dir,
                "runs": report.summaries,
            })
        })
        .collect();
    print_json(&listing)?;
    Ok(if diverged { EXIT_DIVERGED } else { 0 })
}

fn cmd_verify(suite: &str) -> Result<u8> {
    let suite: Suite = suite.parse()?;
    let report = verify(suite);
    print_json(&report)?;
    for c in report.checks.iter().filter(|c| !c.passed) {
        eprintln!("FAILED {}: {}", c.name, c.detail);
    }
    Ok(if report.passed { 0 } else { EXIT_VERIFY_FAILED })
}

fn cmd_suggest(epsilon: f64, regime: &str, config: Option<&Path>) -> Result<u8> {
    let regime: Regime = regime.parse()?;
    let scale = match config {
        Some(path) => {
            let config = load_config(path)?;
            let problem = config.problem.build()?;
            let x0 = match &config.x0 {
                Some(x) => ParamPoint::new(x.clone())?,
                None => problem.default_start(),
            };
            Some(ProblemScale::from_problem(&problem, &x0)?)
        }
        None => None,
    };
    let suggestion = suggest_hyperparams(epsilon, regime, scale.as_ref())?;
    if suggestion.impractical {
        eprintln!("note: horizon T = {} is impractical; relax epsilon", suggestion.horizon);
    }
    print_json(&serde_json::json!({ "scale": scale, "suggestion": suggestion }))?;
    Ok(0)
}

fn cmd_scan(trace: &Path, config: &Path, out: Option<PathBuf>) -> Result<u8> {
    let config = load_config(config)?;
    let problem = config.problem.build()?;
    let records = read_trace(trace)?;
    let scan = local_smoothness_scan(&problem, &records)?;
    let out = out.unwrap_or_else(|| {
        let stem = trace
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        trace.with_file_name(format!("{stem}_smoothness.csv"))
    });
    harness::trace::write_atomic(&out, &harness::smoothness_samples_csv(&scan.samples)?)?;
    let fit = fit_line(&scan.samples).ok();
    print_json(&serde_json::json!({
        "samples": scan.samples.len(),
        "skipped": scan.skipped,
        "fit": fit,
        "output": out,
    }))?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Run { config } => cmd_run(&config),
        Command::Sweep { config, grid } => cmd_sweep(&config, &grid),
        Command::Verify { suite } => cmd_verify(&suite),
        Command::Suggest {
            epsilon,
            regime,
            config,
        } => cmd_suggest(epsilon, &regime, config.as_deref()),
        Command::SmoothnessScan { trace, config, out } => cmd_scan(&trace, &config, out),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_VALIDATION)
        }
    }
}
