//! Single-loop conflict-avoidant optimizers as stepwise state machines.
//!
//! Every step reads `(x_t, w_t)` completely before writing `(x_{t+1}, w_{t+1})`,
//! so the order in which the weight and parameter updates are listed does not
//! matter: the parameter update always uses `w_t`, never `w_{t+1}`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{dot, GradientMatrix, NoiseModel, ObjectiveProblem, ObjectiveValues, ParamPoint};
use crate::simplex::{project_simplex, uniform_weights, WeightVector};
use crate::subproblem::{pgd_step, solve_gram, spectral_radius, SolverSettings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Deterministic gradients, weight update from `G^T G w`.
    Gsmgrad,
    /// Stochastic gradients with double sampling for the weight update.
    Sgsmgrad,
    /// Weight update from function-value differences only.
    GsmgradFa,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Gsmgrad, Algorithm::Sgsmgrad, Algorithm::GsmgradFa];

    pub fn tag(self) -> &'static str {
        match self {
            Algorithm::Gsmgrad => "gsmgrad",
            Algorithm::Sgsmgrad => "sgsmgrad",
            Algorithm::GsmgradFa => "gsmgrad-fa",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

/// Step sizes, regularization and horizon of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub algorithm: Algorithm,
    /// Parameter step size.
    pub alpha: f64,
    /// Weight step size.
    pub beta: f64,
    /// Warm-start step size; `None` uses `1 / (lambda_max(G0^T G0) + rho)`.
    pub beta_prime: Option<f64>,
    pub rho: f64,
    pub warm_start_iters: usize,
    pub horizon: usize,
    /// Mini-batch size of the stochastic oracle.
    pub batch: usize,
    pub seed: u64,
}

impl OptimizerConfig {
    pub fn new(algorithm: Algorithm, alpha: f64, beta: f64, horizon: usize) -> Self {
        OptimizerConfig {
            algorithm,
            alpha,
            beta,
            beta_prime: None,
            rho: 0.0,
            warm_start_iters: 0,
            horizon,
            batch: 1,
            seed: 0,
        }
    }

    pub fn with_rho(mut self, rho: f64) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_warm_start(mut self, iters: usize, beta_prime: Option<f64>) -> Self {
        self.warm_start_iters = iters;
        self.beta_prime = beta_prime;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::config(key, format!("must be finite and > 0, got {v}")))
            }
        };
        positive("alpha", self.alpha)?;
        positive("beta", self.beta)?;
        if let Some(bp) = self.beta_prime {
            positive("beta_prime", bp)?;
        }
        if self.rho < 0.0 || !self.rho.is_finite() {
            return Err(Error::config(
                "rho",
                format!("must be finite and >= 0, got {}", self.rho),
            ));
        }
        if self.batch == 0 {
            return Err(Error::config("batch", "must be >= 1"));
        }
        Ok(())
    }
}

/// Iterate `(x_t, w_t)` plus the last update direction.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub t: usize,
    pub x: ParamPoint,
    pub w: WeightVector,
    /// `d_{t-1}`; empty before the first step.
    pub last_direction: Vec<f64>,
    /// `F(x_t)`, carried between steps by the value-difference variant.
    pub cached_values: Option<ObjectiveValues>,
}

impl OptimizerState {
    pub fn new(x: ParamPoint, w: WeightVector) -> Self {
        OptimizerState {
            t: 0,
            x,
            w,
            last_direction: Vec::new(),
            cached_values: None,
        }
    }
}

/// Diagnostics of one iterate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    /// `||grad F(x_t) w_t||^2`.
    pub stationarity_wt: f64,
    /// `min_{w in W} ||grad F(x_t) w||^2`.
    pub stationarity_min: f64,
    /// `||grad F(x_t) w_t - grad F(x_t) w_t*||`.
    pub ca_distance: f64,
    pub values: Vec<f64>,
    pub grad_norms: Vec<f64>,
}

impl IterationRecord {
    /// Evaluates the record of state `(x, w)` at iteration `t`.
    pub fn evaluate(
        problem: &ObjectiveProblem,
        t: usize,
        x: &ParamPoint,
        w: &WeightVector,
        solver: SolverSettings,
    ) -> Result<Self> {
        let g = problem.eval_gradients(x)?;
        let values = problem.eval_values(x)?;
        let d = g.combine(w.as_slice())?;
        let star = solve_gram(&g.gram(), 0.0, solver)?;
        let d_star = g.combine(star.weights.as_slice())?;
        Ok(IterationRecord {
            t,
            x: x.as_slice().to_vec(),
            w: w.as_slice().to_vec(),
            stationarity_wt: dot(&d, &d),
            stationarity_min: dot(&d_star, &d_star),
            ca_distance: crate::simplex::euclidean_distance(&d, &d_star),
            values: values.0,
            grad_norms: g.column_norms(),
        })
    }
}

/// Iterates `w_0, ..., w_N` of projected gradient descent on the fixed Gram
/// matrix of `g`.
pub fn warm_start_path(
    g: &GradientMatrix,
    w0: &WeightVector,
    rho: f64,
    beta_prime: f64,
    iters: usize,
) -> Result<Vec<WeightVector>> {
    if w0.len() != g.tasks() {
        return Err(Error::invalid(format!(
            "initial weights have {} entries, problem has {} tasks",
            w0.len(),
            g.tasks()
        )));
    }
    if beta_prime <= 0.0 || !beta_prime.is_finite() {
        return Err(Error::invalid(format!("beta_prime must be > 0, got {beta_prime}")));
    }
    // The Gram matrix is formed once and reused by every iteration.
    let gram = g.gram();
    let mut path = Vec::with_capacity(iters + 1);
    path.push(w0.clone());
    for _ in 0..iters {
        let next = pgd_step(&gram, path.last().unwrap(), rho, beta_prime)?;
        path.push(next);
    }
    Ok(path)
}

/// Warm start on a given gradient matrix: returns `w_N`.
pub fn warm_start_on(
    g: &GradientMatrix,
    w0: &WeightVector,
    rho: f64,
    beta_prime: f64,
    iters: usize,
) -> Result<WeightVector> {
    Ok(warm_start_path(g, w0, rho, beta_prime, iters)?.pop().unwrap())
}

/// Warm start at `x0`: `N` projected-gradient steps on the weight problem
/// with the gradients frozen at `x0`.
pub fn warm_start(
    problem: &ObjectiveProblem,
    x0: &ParamPoint,
    w0: &WeightVector,
    rho: f64,
    beta_prime: f64,
    iters: usize,
) -> Result<WeightVector> {
    if iters == 0 {
        return Ok(w0.clone());
    }
    let g = problem.eval_gradients(x0)?;
    warm_start_on(&g, w0, rho, beta_prime, iters)
}

/// The step `1 / (lambda_max(G^T G) + rho)` used when no warm-start step is given.
pub fn default_beta_prime(g: &GradientMatrix, rho: f64) -> f64 {
    let curvature = spectral_radius(&g.gram()) + rho;
    if curvature > 0.0 {
        1.0 / curvature
    } else {
        1.0
    }
}

fn check_step(state: &OptimizerState, config: &OptimizerConfig) -> Result<()> {
    if state.t >= config.horizon {
        return Err(Error::invalid(format!(
            "iteration {} is past the horizon {}",
            state.t, config.horizon
        )));
    }
    Ok(())
}

fn at(t: usize) -> impl FnOnce(Error) -> Error {
    move |e| Error::AtIteration { t, source: Box::new(e) }
}

fn weight_update(w: &WeightVector, weight_grad: &[f64], beta: f64, rho: f64) -> Result<WeightVector> {
    let moved: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(weight_grad)
        .map(|(wi, gi)| wi - beta * (gi + rho * wi))
        .collect();
    project_simplex(&moved)
}

/// Deterministic step:
/// `w_{t+1} = Pi_W(w_t - beta (G^T G w_t + rho w_t))`, `x_{t+1} = x_t - alpha G w_t`
/// with a single gradient evaluation `G = grad F(x_t)`.
pub fn gsmgrad_step(
    problem: &ObjectiveProblem,
    state: &OptimizerState,
    config: &OptimizerConfig,
) -> Result<OptimizerState> {
    check_step(state, config)?;
    let t = state.t;
    (|| {
        let g = problem.eval_gradients(&state.x)?;
        let d = g.combine(state.w.as_slice())?;
        // G^T G w = G^T d
        let weight_grad = g.project_onto_tasks(&d)?;
        let w = weight_update(&state.w, &weight_grad, config.beta, config.rho)?;
        let x = state.x.stepped(config.alpha, &d)?;
        Ok(OptimizerState {
            t: t + 1,
            x,
            w,
            last_direction: d,
            cached_values: None,
        })
    })()
    .map_err(at(t))
}

/// Double-sampled weight gradient `G_2^T G_3 w` from independent draws 2 and 3.
pub fn weight_gradient_estimate(
    problem: &ObjectiveProblem,
    x: &ParamPoint,
    w: &WeightVector,
    noise: &NoiseModel,
    t: u64,
    batch: usize,
) -> Result<Vec<f64>> {
    let g2 = problem.stochastic_gradients(x, noise, t, 2, batch)?;
    let g3 = problem.stochastic_gradients(x, noise, t, 3, batch)?;
    let d3 = g3.combine(w.as_slice())?;
    g2.project_onto_tasks(&d3)
}

/// Stochastic step with three independent gradient draws at `x_t`:
/// `x_{t+1} = x_t - alpha G_1 w_t` and
/// `w_{t+1} = Pi_W(w_t - beta (G_2^T G_3 w_t + rho w_t))`.
pub fn sgsmgrad_step(
    problem: &ObjectiveProblem,
    state: &OptimizerState,
    config: &OptimizerConfig,
    noise: &NoiseModel,
) -> Result<OptimizerState> {
    check_step(state, config)?;
    let t = state.t;
    (|| {
        let g1 = problem.stochastic_gradients(&state.x, noise, t as u64, 1, config.batch)?;
        let d = g1.combine(state.w.as_slice())?;
        let weight_grad = weight_gradient_estimate(problem, &state.x, &state.w, noise, t as u64, config.batch)?;
        let w = weight_update(&state.w, &weight_grad, config.beta, config.rho)?;
        let x = state.x.stepped(config.alpha, &d)?;
        Ok(OptimizerState {
            t: t + 1,
            x,
            w,
            last_direction: d,
            cached_values: None,
        })
    })()
    .map_err(at(t))
}

/// Value-difference step: `x_{t+1} = x_t - alpha G w_t` and
/// `w_{t+1} = Pi_W(w_t - beta ((F(x_t) - F(x_{t+1})) / alpha + rho w_t))`.
///
/// One gradient call and one value call per step; `F(x_{t+1})` is cached
/// in the returned state for the next step.
pub fn gsmgrad_fa_step(
    problem: &ObjectiveProblem,
    state: &OptimizerState,
    config: &OptimizerConfig,
) -> Result<OptimizerState> {
    check_step(state, config)?;
    let t = state.t;
    (|| {
        let current = match &state.cached_values {
            Some(v) => v.clone(),
            None => problem.eval_values(&state.x)?,
        };
        let g = problem.eval_gradients(&state.x)?;
        let d = g.combine(state.w.as_slice())?;
        let x = state.x.stepped(config.alpha, &d)?;
        let next = problem.eval_values(&x)?;
        let weight_grad: Vec<f64> = current
            .as_slice()
            .iter()
            .zip(next.as_slice())
            .map(|(a, b)| (a - b) / config.alpha)
            .collect();
        let w = weight_update(&state.w, &weight_grad, config.beta, config.rho)?;
        Ok(OptimizerState {
            t: t + 1,
            x,
            w,
            last_direction: d,
            cached_values: Some(next),
        })
    })()
    .map_err(at(t))
}

/// Dispatches on `config.algorithm`.
pub fn step(
    problem: &ObjectiveProblem,
    state: &OptimizerState,
    config: &OptimizerConfig,
    noise: Option<&NoiseModel>,
) -> Result<OptimizerState> {
    match (config.algorithm, noise) {
        (Algorithm::Gsmgrad, _) => gsmgrad_step(problem, state, config),
        (Algorithm::GsmgradFa, _) => gsmgrad_fa_step(problem, state, config),
        (Algorithm::Sgsmgrad, Some(noise)) => sgsmgrad_step(problem, state, config, noise),
        (Algorithm::Sgsmgrad, None) => Err(Error::config("sigma", "noise model required for sgsmgrad")),
    }
}

/// Initial point and recording options of [`run`].
#[derive(Clone, Debug)]
pub struct RunOptions {
    /// Starting point; defaults to the problem's default start.
    pub x0: Option<ParamPoint>,
    /// Initial weights (before warm start); defaults to uniform.
    pub w0: Option<WeightVector>,
    /// Record every `record_every` iterations, plus the first and last.
    pub record_every: usize,
    /// Solver used for the `min_w` and CA-distance fields of each record.
    pub solver: SolverSettings,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            x0: None,
            w0: None,
            record_every: 1,
            solver: SolverSettings::REFERENCE,
        }
    }
}

/// Result of a run. A mid-run oracle failure ends the run early with the
/// partial trace and the error.
#[derive(Debug)]
pub struct RunOutcome {
    pub records: Vec<IterationRecord>,
    /// Weights after the (optional) warm start.
    pub initial_weights: WeightVector,
    pub final_state: OptimizerState,
    pub iterations_completed: usize,
    /// Set when an oracle overflowed.
    pub diverged: bool,
    pub error: Option<Error>,
}

/// Runs the configured algorithm for `config.horizon` steps, recording
/// iterates `t = 0, record_every, 2 record_every, ...` and `t = T - 1`.
pub fn run(
    problem: &ObjectiveProblem,
    config: &OptimizerConfig,
    noise: Option<&NoiseModel>,
    options: &RunOptions,
) -> Result<RunOutcome> {
    config.validate()?;
    match (config.algorithm, noise) {
        (Algorithm::Sgsmgrad, None) => {
            return Err(Error::config("sigma", "noise model required for sgsmgrad"));
        }
        (Algorithm::Gsmgrad | Algorithm::GsmgradFa, Some(_)) => {
            return Err(Error::config(
                "sigma",
                format!("noise model only applies to sgsmgrad, not {}", config.algorithm),
            ));
        }
        _ => {}
    }
    if let Some(noise) = noise {
        noise.validate()?;
    }
    if options.record_every == 0 {
        return Err(Error::config("record_every", "must be >= 1"));
    }
    let x0 = options.x0.clone().unwrap_or_else(|| problem.default_start());
    if x0.dim() != problem.dim() {
        return Err(Error::config(
            "x0",
            format!("has dimension {}, problem has m = {}", x0.dim(), problem.dim()),
        ));
    }
    let w0 = match &options.w0 {
        Some(w) if w.len() != problem.num_tasks() => {
            return Err(Error::config(
                "w0",
                format!("has {} entries, problem has K = {}", w.len(), problem.num_tasks()),
            ));
        }
        Some(w) => w.clone(),
        None => uniform_weights(problem.num_tasks())?,
    };

    let initial = if config.warm_start_iters > 0 {
        let g0 = problem.eval_gradients(&x0)?;
        let beta_prime = config.beta_prime.unwrap_or_else(|| default_beta_prime(&g0, config.rho));
        warm_start_on(&g0, &w0, config.rho, beta_prime, config.warm_start_iters)?
    } else {
        w0
    };

    let horizon = config.horizon;
    let last = horizon.saturating_sub(1);
    let mut state = OptimizerState::new(x0, initial.clone());
    let mut records = Vec::new();
    let mut failure = None;

    for t in 0..horizon.max(1) {
        if t == 0 || t % options.record_every == 0 || t == last {
            match IterationRecord::evaluate(problem, t, &state.x, &state.w, options.solver) {
                Ok(r) => records.push(r),
                Err(e) => {
                    failure = Some(Error::AtIteration { t, source: Box::new(e) });
                    break;
                }
            }
        }
        if t >= horizon {
            break;
        }
        match step(problem, &state, config, noise) {
            Ok(next) => state = next,
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }

    let diverged = failure.as_ref().is_some_and(Error::is_overflow);
    Ok(RunOutcome {
        records,
        initial_weights: initial,
        iterations_completed: state.t,
        final_state: state,
        diverged,
        error: failure,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{builtin_problem, BuiltinProblem, ProblemParams, Task};

    /// f1 = x^2 / 2, f2 = (x - 1)^2 / 2.
    fn shifted_pair() -> ObjectiveProblem {
        ObjectiveProblem::from_tasks(
            "shifted-pair",
            vec![
                Task::Quadratic { center: vec![0.0] },
                Task::Quadratic { center: vec![1.0] },
            ],
        )
        .unwrap()
    }

    fn origin_state() -> OptimizerState {
        OptimizerState::new(
            ParamPoint::new(vec![0.0]).unwrap(),
            WeightVector::new(vec![0.5, 0.5]).unwrap(),
        )
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn gsmgrad_step_hand_computed() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 10);
        let next = gsmgrad_step(&p, &origin_state(), &cfg).unwrap();
        assert!(close(next.w.as_slice(), &[0.525, 0.475], 1e-15));
        assert!(close(next.x.as_slice(), &[0.05], 1e-15));
        assert_eq!(next.last_direction, vec![-0.5]);
        assert_eq!(next.t, 1);
    }

    #[test]
    fn gsmgrad_step_uses_one_gradient_call() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 10);
        p.calls().reset();
        gsmgrad_step(&p, &origin_state(), &cfg).unwrap();
        assert_eq!(p.calls().gradients(), 1);
        assert_eq!(p.calls().values(), 0);
    }

    #[test]
    fn fa_step_hand_computed() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::GsmgradFa, 0.1, 0.1, 10);
        let next = gsmgrad_fa_step(&p, &origin_state(), &cfg).unwrap();
        assert!(close(next.x.as_slice(), &[0.05], 1e-15));
        let cached = next.cached_values.as_ref().unwrap();
        assert!(close(cached.as_slice(), &[0.00125, 0.45125], 1e-15));
        assert!(close(next.w.as_slice(), &[0.525, 0.475], 1e-12));
    }

    #[test]
    fn fa_estimate_differs_from_exact_weight_gradient_by_remainder() {
        // exact G^T G w = (0, 0.5); the value-difference estimate is
        // (-0.0125, 0.4875), off by alpha ||d||^2 / 2 = 0.0125 in each entry.
        let p = shifted_pair();
        let s = origin_state();
        let alpha = 0.1;
        let f0 = p.eval_values(&s.x).unwrap();
        let g = p.eval_gradients(&s.x).unwrap();
        let d = g.combine(s.w.as_slice()).unwrap();
        let exact = g.project_onto_tasks(&d).unwrap();
        let f1 = p.eval_values(&s.x.stepped(alpha, &d).unwrap()).unwrap();
        let fa: Vec<f64> = f0.0.iter().zip(&f1.0).map(|(a, b)| (a - b) / alpha).collect();
        assert!(close(&exact, &[0.0, 0.5], 1e-15));
        assert!(close(&fa, &[-0.0125, 0.4875], 1e-12));
    }

    #[test]
    fn fa_step_call_budget_and_cache() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::GsmgradFa, 0.1, 0.1, 10);
        p.calls().reset();
        let s1 = gsmgrad_fa_step(&p, &origin_state(), &cfg).unwrap();
        // t = 0 pays one extra value evaluation for F(x_0)
        assert_eq!((p.calls().gradients(), p.calls().values()), (1, 2));
        p.calls().reset();
        gsmgrad_fa_step(&p, &s1, &cfg).unwrap();
        assert_eq!((p.calls().gradients(), p.calls().values()), (1, 1));
    }

    #[test]
    fn step_past_horizon_is_rejected() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 0);
        assert!(gsmgrad_step(&p, &origin_state(), &cfg).is_err());
    }

    #[test]
    fn warm_start_zero_iterations_is_identity() {
        let p = shifted_pair();
        let w0 = WeightVector::new(vec![0.9, 0.1]).unwrap();
        let x0 = ParamPoint::new(vec![0.3]).unwrap();
        assert_eq!(warm_start(&p, &x0, &w0, 0.1, 0.5, 0).unwrap(), w0);
    }

    #[test]
    fn warm_start_one_step_hand_computed() {
        // Pi((1, 0) - 0.4 (1.1, 0)) = Pi((0.56, 0)) = (0.78, 0.22)
        let g = GradientMatrix::from_columns(vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let w0 = WeightVector::vertex(2, 0).unwrap();
        let w1 = warm_start_on(&g, &w0, 0.1, 0.4, 1).unwrap();
        assert!(close(w1.as_slice(), &[0.78, 0.22], 1e-15));
    }

    #[test]
    fn warm_start_symmetric_quartic_reaches_half() {
        let p = builtin_problem(BuiltinProblem::QuarticPair, 1, &ProblemParams::new()).unwrap();
        let x0 = ParamPoint::new(vec![0.0]).unwrap();
        let w0 = WeightVector::new(vec![0.9, 0.1]).unwrap();
        let g = p.eval_gradients(&x0).unwrap();
        let bp = default_beta_prime(&g, 0.01);
        let w = warm_start(&p, &x0, &w0, 0.01, bp, 500).unwrap();
        assert!(close(w.as_slice(), &[0.5, 0.5], 1e-3));
    }

    #[test]
    fn single_task_reduces_to_gradient_descent() {
        let p = ObjectiveProblem::from_tasks("quartic", vec![Task::Quartic { center: vec![0.5] }]).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.05, 0.1, 200);
        let mut state = OptimizerState::new(ParamPoint::new(vec![2.0]).unwrap(), uniform_weights(1).unwrap());
        let mut x = 2.0f64;
        for _ in 0..200 {
            state = gsmgrad_step(&p, &state, &cfg).unwrap();
            x -= 0.05 * (x - 0.5).powi(3);
            assert_eq!(state.w.as_slice(), &[1.0]);
            assert!((state.x.as_slice()[0] - x).abs() <= 1e-12);
        }
    }

    #[test]
    fn zero_noise_stochastic_step_equals_deterministic() {
        let p = builtin_problem(BuiltinProblem::QuarticPair, 2, &ProblemParams::new()).unwrap();
        let det = OptimizerConfig::new(Algorithm::Gsmgrad, 0.01, 0.1, 5);
        let sto = OptimizerConfig {
            algorithm: Algorithm::Sgsmgrad,
            ..det.clone()
        };
        let noise = NoiseModel::gaussian(0.0, 9);
        let mut a = OptimizerState::new(p.default_start(), uniform_weights(2).unwrap());
        let mut b = a.clone();
        for _ in 0..5 {
            a = gsmgrad_step(&p, &a, &det).unwrap();
            b = sgsmgrad_step(&p, &b, &sto, &noise).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn run_requires_consistent_noise() {
        let p = shifted_pair();
        let sto = OptimizerConfig::new(Algorithm::Sgsmgrad, 0.1, 0.1, 5);
        assert!(matches!(
            run(&p, &sto, None, &RunOptions::default()),
            Err(Error::Config { .. })
        ));
        let det = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 5);
        let noise = NoiseModel::gaussian(0.1, 1);
        assert!(run(&p, &det, Some(&noise), &RunOptions::default()).is_err());
        let bad = OptimizerConfig::new(Algorithm::Gsmgrad, -0.1, 0.1, 5);
        match run(&p, &bad, None, &RunOptions::default()) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "alpha"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn zero_horizon_records_only_initial_state() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 0).with_warm_start(10, None);
        let out = run(&p, &cfg, None, &RunOptions::default()).unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.records[0].t, 0);
        assert_eq!(out.iterations_completed, 0);
    }

    #[test]
    fn recording_schedule() {
        let p = shifted_pair();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 10);
        let opts = RunOptions {
            record_every: 4,
            ..RunOptions::default()
        };
        let out = run(&p, &cfg, None, &opts).unwrap();
        let ts: Vec<usize> = out.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 4, 8, 9]);
        assert_eq!(out.iterations_completed, 10);
        assert_eq!(out.final_state.t, 10);
    }

    #[test]
    fn overflow_marks_run_diverged() {
        let p = builtin_problem(BuiltinProblem::ExpPair, 1, &ProblemParams::new()).unwrap();
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 50.0, 0.1, 100);
        let opts = RunOptions {
            w0: Some(WeightVector::vertex(2, 1).unwrap()),
            ..RunOptions::default()
        };
        let out = run(&p, &cfg, None, &opts).unwrap();
        assert!(out.diverged);
        assert!(out.error.is_some());
        assert!(out.iterations_completed < 100);
        assert!(!out.records.is_empty());
    }
}
