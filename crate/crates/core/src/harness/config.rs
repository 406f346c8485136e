//! Experiment configuration: a flat TOML document.
//!
//! ```toml
//! problem = "quadratic-pair"
//! dim = 2
//! algorithm = "gsmgrad"
//! alpha = 0.1
//! beta = 0.1
//! T = 1000
//! seed = 1
//!
//! [params]
//! c1 = -1.0
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{builtin_problem, BuiltinProblem, NoiseModel, ObjectiveProblem, ParamPoint, ProblemParams};
use crate::optimizers::{Algorithm, OptimizerConfig};

/// Overrides the root against which relative output directories resolve.
pub const OUTPUT_ROOT_ENV: &str = "GSMGRAD_OUTPUT_ROOT";

pub const DEFAULT_OUTPUT_DIR: &str = "runs";

/// How the initial weights are chosen.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialWeights {
    #[default]
    Uniform,
    /// A uniform draw from the simplex, seeded by the run seed.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub name: BuiltinProblem,
    pub dim: usize,
    pub params: ProblemParams,
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ObjectiveProblem> {
        builtin_problem(self.name, self.dim, &self.params)
    }
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    /// `seed` is replaced per run by each entry of `seeds`.
    pub optimizer: OptimizerConfig,
    /// Noise scale; present iff the algorithm is stochastic.
    pub sigma: Option<f64>,
    pub seeds: Vec<u64>,
    pub record_every: usize,
    pub output_dir: PathBuf,
    pub x0: Option<Vec<f64>>,
    pub w0: InitialWeights,
}

impl ExperimentConfig {
    pub fn noise_for(&self, seed: u64) -> Option<NoiseModel> {
        self.sigma.map(|s| NoiseModel::gaussian(s, seed))
    }

    pub fn optimizer_for(&self, seed: u64) -> OptimizerConfig {
        OptimizerConfig {
            seed,
            ..self.optimizer.clone()
        }
    }

    /// Output directory with [`OUTPUT_ROOT_ENV`] applied to relative paths.
    pub fn resolved_output_dir(&self) -> PathBuf {
        resolve_output_dir(
            &self.output_dir,
            std::env::var_os(OUTPUT_ROOT_ENV).as_deref().map(Path::new),
        )
    }
}

pub(crate) fn resolve_output_dir(dir: &Path, root: Option<&Path>) -> PathBuf {
    match root {
        Some(root) if dir.is_relative() => root.join(dir),
        _ => dir.to_path_buf(),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: String,
    #[serde(default = "one")]
    dim: usize,
    #[serde(default)]
    params: ProblemParams,
    algorithm: String,
    alpha: f64,
    beta: f64,
    beta_prime: Option<f64>,
    #[serde(default)]
    rho: f64,
    #[serde(default)]
    warm_start_iters: usize,
    #[serde(rename = "T", alias = "horizon")]
    horizon: usize,
    #[serde(default = "one")]
    batch: usize,
    sigma: Option<f64>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    #[serde(default = "one")]
    record_every: usize,
    output_dir: Option<PathBuf>,
    x0: Option<Vec<f64>>,
    w0: Option<String>,
}

fn one() -> usize {
    1
}

/// Parses and validates a config document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    // Syntax first, so malformed documents are not reported as a bad key.
    parse_table(text)?;
    let raw: RawConfig = toml::from_str(text).map_err(|e| semantic_error(text, &e))?;
    validate(raw)
}

/// Parses a config document into an editable table (used by sweeps).
pub fn parse_table(text: &str) -> Result<toml::Table> {
    text.parse()
        .map_err(|e: toml::de::Error| Error::ConfigSyntax(e.to_string()))
}

/// Validates an edited table.
pub fn config_from_table(table: &toml::Table) -> Result<ExperimentConfig> {
    let text = toml::to_string(table).map_err(|e| Error::ConfigSyntax(e.to_string()))?;
    parse_config(&text)
}

pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

/// Maps a deserialization failure to the key it concerns.
fn semantic_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().to_string();
    let quoted = |prefix: &str| {
        message
            .strip_prefix(prefix)
            .and_then(|rest| rest.split('`').next())
            .map(str::to_string)
    };
    let key = quoted("missing field `")
        .or_else(|| quoted("unknown field `"))
        .or_else(|| {
            // the span points at the offending value; its line starts with the key
            let span = err.span()?;
            let line_start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
            let line = &text[line_start..];
            let key = line.split('=').next()?.trim();
            (!key.is_empty() && !key.contains('\n')).then(|| key.trim_matches('"').to_string())
        })
        .unwrap_or_else(|| "<document>".to_string());
    let line = err.span().map(|s| text[..s.start].matches('\n').count() + 1);
    let message = match line {
        Some(line) => format!("{message} (line {line})"),
        None => message,
    };
    Error::Config { key, message }
}

fn validate(raw: RawConfig) -> Result<ExperimentConfig> {
    let name: BuiltinProblem = raw
        .problem
        .parse()
        .map_err(|e: Error| Error::config("problem", strip_kind(&e)))?;
    if raw.dim == 0 {
        return Err(Error::config("dim", "must be >= 1"));
    }
    let algorithm = parse_algorithm(&raw.algorithm)?;
    let problem = ProblemSpec {
        name,
        dim: raw.dim,
        params: raw.params,
    };
    let built = problem.build().map_err(|e| Error::config("params", strip_kind(&e)))?;

    let seeds = match (raw.seed, raw.seeds) {
        (Some(_), Some(_)) => return Err(Error::config("seeds", "give either `seed` or `seeds`, not both")),
        (Some(s), None) => vec![s],
        (None, Some(list)) if list.is_empty() => return Err(Error::config("seeds", "must not be empty")),
        (None, Some(list)) => list,
        (None, None) => vec![0],
    };
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::config("seeds", format!("seed {} is listed twice", w[0])));
    }

    let optimizer = OptimizerConfig {
        algorithm,
        alpha: raw.alpha,
        beta: raw.beta,
        beta_prime: raw.beta_prime,
        rho: raw.rho,
        warm_start_iters: raw.warm_start_iters,
        horizon: raw.horizon,
        batch: raw.batch,
        seed: seeds[0],
    };
    optimizer.validate()?;

    match (algorithm, raw.sigma) {
        (Algorithm::Sgsmgrad, None) => {
            return Err(Error::config("sigma", "noise model required for algorithm sgsmgrad"));
        }
        (Algorithm::Sgsmgrad, Some(s)) => NoiseModel::gaussian(s, 0).validate()?,
        (_, Some(_)) => {
            return Err(Error::config(
                "sigma",
                format!("noise only applies to sgsmgrad, not {algorithm}"),
            ));
        }
        (_, None) => {}
    }
    if raw.record_every == 0 {
        return Err(Error::config("record_every", "must be >= 1"));
    }
    if let Some(x0) = &raw.x0 {
        if x0.len() != built.dim() {
            return Err(Error::config(
                "x0",
                format!("has {} coordinates, problem has dim = {}", x0.len(), built.dim()),
            ));
        }
        ParamPoint::new(x0.clone()).map_err(|e| Error::config("x0", strip_kind(&e)))?;
    }
    let w0 = match raw.w0.as_deref() {
        None | Some("uniform") => InitialWeights::Uniform,
        Some("random") => InitialWeights::Random,
        Some(other) => {
            return Err(Error::config(
                "w0",
                format!("unknown initializer `{other}`; valid values are uniform, random"),
            ));
        }
    };

    Ok(ExperimentConfig {
        problem,
        optimizer,
        sigma: raw.sigma,
        seeds,
        record_every: raw.record_every,
        output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR)),
        x0: raw.x0,
        w0,
    })
}

fn parse_algorithm(tag: &str) -> Result<Algorithm> {
    Algorithm::ALL.into_iter().find(|a| a.tag() == tag).ok_or_else(|| {
        let tags: Vec<_> = Algorithm::ALL.iter().map(|a| a.tag()).collect();
        Error::config(
            "algorithm",
            format!("unknown algorithm `{tag}`; valid tags are {}", tags.join(", ")),
        )
    })
}

fn strip_kind(e: &Error) -> String {
    match e {
        Error::InvalidArgument(m) => m.clone(),
        other => other.to_string(),
    }
}
