//! Runtime verification suites over the library's invariants.
//!
//! Each suite is a list of named checks on fixed-seed random instances and
//! reports pass/fail with a short detail string.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{check_hessian_bound, check_phi_bound, remainder_measure};
use crate::error::{Error, Result};
use crate::objectives::{
    builtin_problem, dot, norm, BuiltinProblem, GradientMatrix, NoiseModel, ObjectiveProblem, ParamPoint,
    ProblemParams, Task,
};
use crate::optimizers::{
    default_beta_prime, gsmgrad_fa_step, gsmgrad_step, run, sgsmgrad_step, warm_start_path, Algorithm, OptimizerConfig,
    OptimizerState, RunOptions,
};
use crate::simplex::{
    brute_force_projection, euclidean_distance, is_in_simplex, project_simplex, random_weights, uniform_weights,
    WeightVector,
};
use crate::subproblem::{solve_gram, solve_w_rho, stationarity_measure, SolverSettings};

/// Soft budget for the full suite.
pub const RUNTIME_BUDGET_SECONDS: f64 = 300.0;

const SEED: u64 = 0x6A5D_2024;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    Simplex,
    Subproblem,
    Lemmas,
    Optimizers,
    All,
}

impl Suite {
    pub const ALL: [Suite; 5] = [
        Suite::Simplex,
        Suite::Subproblem,
        Suite::Lemmas,
        Suite::Optimizers,
        Suite::All,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Suite::Simplex => "simplex",
            Suite::Subproblem => "subproblem",
            Suite::Lemmas => "lemmas",
            Suite::Optimizers => "optimizers",
            Suite::All => "all",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL.into_iter().find(|x| x.tag() == s).ok_or_else(|| {
            let tags: Vec<_> = Suite::ALL.iter().map(|x| x.tag()).collect();
            Error::invalid(format!("unknown suite `{s}`; valid suites are {}", tags.join(", ")))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckResult {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        CheckResult {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }

    /// A check whose evaluation itself errored counts as failed.
    fn from_result(name: &str, r: Result<(bool, String)>) -> Self {
        match r {
            Ok((passed, detail)) => CheckResult::new(name, passed, detail),
            Err(e) => CheckResult::new(name, false, format!("error: {e}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub suite: Suite,
    pub passed: bool,
    pub seconds: f64,
    pub checks: Vec<CheckResult>,
}

pub fn verify(suite: Suite) -> VerifyReport {
    let started = Instant::now();
    let mut checks = Vec::new();
    if matches!(suite, Suite::Simplex | Suite::All) {
        checks.extend(simplex_checks());
    }
    if matches!(suite, Suite::Subproblem | Suite::All) {
        checks.extend(subproblem_checks());
    }
    if matches!(suite, Suite::Lemmas | Suite::All) {
        checks.extend(verify_lemmas_on(&builtin_problems()));
    }
    if matches!(suite, Suite::Optimizers | Suite::All) {
        checks.extend(optimizer_checks());
    }
    let seconds = started.elapsed().as_secs_f64();
    if suite == Suite::All {
        checks.push(CheckResult::new(
            "runtime-budget",
            seconds <= RUNTIME_BUDGET_SECONDS,
            format!("{seconds:.1} s of {RUNTIME_BUDGET_SECONDS} s"),
        ));
    }
    VerifyReport {
        suite,
        passed: checks.iter().all(|c| c.passed),
        seconds,
        checks,
    }
}

fn builtin_problems() -> Vec<ObjectiveProblem> {
    let mut out = Vec::new();
    for name in BuiltinProblem::ALL {
        for dim in [1, 2] {
            out.push(builtin_problem(name, dim, &ProblemParams::new()).expect("built-in defaults are valid"));
        }
    }
    out
}

fn normal_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn random_gradients(rng: &mut ChaCha8Rng, dim: usize, tasks: usize) -> GradientMatrix {
    GradientMatrix::from_columns((0..tasks).map(|_| normal_vec(rng, dim)).collect()).expect("finite draws")
}

/// Grid resolution used against the brute-force oracle for each K.
pub fn oracle_resolution(k: usize) -> usize {
    match k {
        0..=3 => 1000,
        _ => 200,
    }
}

fn simplex_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut out = Vec::new();

    let oracle = (|| {
        let mut worst = 0.0f64;
        for i in 0..1000 {
            let k = 2 + i % 3;
            let v = uniform_vec(&mut rng, k, -2.0, 2.0);
            let proj = project_simplex(&v)?;
            let res = oracle_resolution(k);
            let grid = brute_force_projection(&v, res)?;
            let spacing = (k as f64).sqrt() / res as f64;
            let gap = euclidean_distance(grid.as_slice(), &v) - euclidean_distance(proj.as_slice(), &v);
            if !(-1e-12..=spacing + 1e-12).contains(&gap) {
                return Ok((
                    false,
                    format!("v = {v:?}: distance gap {gap:e} outside [0, {spacing:e}]"),
                ));
            }
            worst = worst.max(gap);
        }
        Ok((true, format!("1000 projections, worst distance gap {worst:.3e}")))
    })();
    out.push(CheckResult::from_result("projection-matches-grid-oracle", oracle));

    let idem = (|| {
        for _ in 0..1000 {
            let k = rng.random_range(1..8);
            let p = project_simplex(&uniform_vec(&mut rng, k, -3.0, 3.0))?;
            if project_simplex(p.as_slice())? != p || !is_in_simplex(p.as_slice()) {
                return Ok((false, format!("not idempotent at {p:?}")));
            }
        }
        Ok((true, "1000 vectors".to_string()))
    })();
    out.push(CheckResult::from_result("projection-idempotent", idem));

    let nonexp = (|| {
        for _ in 0..1000 {
            let k = rng.random_range(1..8);
            let u = uniform_vec(&mut rng, k, -3.0, 3.0);
            let v = uniform_vec(&mut rng, k, -3.0, 3.0);
            let lhs = project_simplex(&u)?.distance(&project_simplex(&v)?);
            let rhs = euclidean_distance(&u, &v);
            if lhs > rhs + 1e-12 {
                return Ok((false, format!("{lhs} > {rhs}")));
            }
        }
        Ok((true, "1000 pairs".to_string()))
    })();
    out.push(CheckResult::from_result("projection-non-expansive", nonexp));
    out
}

fn closed_form_checks() -> Result<(bool, String)> {
    let cases: [(Vec<Vec<f64>>, f64, [f64; 2]); 4] = [
        (vec![vec![1.0, 0.0], vec![0.0, 1.0]], 0.0, [0.5, 0.5]),
        (vec![vec![2.0, 0.0], vec![0.0, 1.0]], 0.0, [0.2, 0.8]),
        (vec![vec![1.0, -2.0], vec![-1.0, 2.0]], 0.0, [0.5, 0.5]),
        (vec![vec![0.3, 0.4], vec![0.3, 0.4]], 0.1, [0.5, 0.5]),
    ];
    for (cols, rho, expected) in cases {
        let g = GradientMatrix::from_columns(cols.clone())?;
        let sol = solve_w_rho(&g, rho, 1e-12, 1_000_000)?;
        if euclidean_distance(sol.weights.as_slice(), &expected) > 1e-8 {
            return Ok((false, format!("{cols:?}: got {:?}", sol.weights.as_slice())));
        }
    }
    Ok((true, "4 closed forms within 1e-8".to_string()))
}

fn grid_min_stationarity(g: &GradientMatrix, res: usize) -> f64 {
    let h = 1.0 / res as f64;
    let mut best = f64::INFINITY;
    let eval = |w: &[f64]| {
        let d = g.combine(w).expect("matching size");
        dot(&d, &d)
    };
    match g.tasks() {
        1 => best = eval(&[1.0]),
        2 => {
            for i in 0..=res {
                let a = i as f64 * h;
                best = best.min(eval(&[a, 1.0 - a]));
            }
        }
        3 => {
            for i in 0..=res {
                for j in 0..=res - i {
                    let (a, b) = (i as f64 * h, j as f64 * h);
                    best = best.min(eval(&[a, b, (1.0 - a - b).max(0.0)]));
                }
            }
        }
        _ => unreachable!("grid oracle is only used for K <= 3"),
    }
    best
}

fn subproblem_checks() -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 1);
    let mut out = vec![CheckResult::from_result("closed-forms", closed_form_checks())];

    let gap = (|| {
        let mut worst = 0.0f64;
        for _ in 0..100 {
            let k = rng.random_range(2..6);
            let g = random_gradients(&mut rng, 3, k);
            let star = solve_w_rho(&g, 0.0, 1e-12, 1_000_000)?;
            let d_star = g.combine(star.weights.as_slice())?;
            for rho in [1e-4, 1e-2, 1e-1] {
                let reg = solve_w_rho(&g, rho, 1e-12, 1_000_000)?;
                let dist = euclidean_distance(&d_star, &g.combine(reg.weights.as_slice())?);
                worst = worst.max(dist / rho.sqrt());
                if dist > rho.sqrt() + 1e-6 {
                    return Ok((false, format!("rho = {rho}: gap {dist} > sqrt(rho)")));
                }
            }
        }
        Ok((true, format!("300 instances, worst gap / sqrt(rho) = {worst:.3}")))
    })();
    out.push(CheckResult::from_result("sqrt-rho-gap", gap));

    let strong = (|| {
        for _ in 0..100 {
            let k = rng.random_range(2..6);
            let g = random_gradients(&mut rng, 3, k);
            let rho = [1e-3, 1e-2, 1e-1][rng.random_range(0..3)];
            let gram = g.gram();
            let sol = solve_gram(&gram, rho, SolverSettings::REFERENCE)?;
            let j = |w: &[f64]| 0.5 * gram.quadratic_form(w) + 0.5 * rho * dot(w, w);
            for _ in 0..10 {
                let w = random_weights(k, &mut rng)?;
                let lhs = j(w.as_slice()) - j(sol.weights.as_slice());
                let rhs = 0.5 * rho * w.distance(&sol.weights).powi(2);
                if lhs < rhs - 1e-10 {
                    return Ok((false, format!("J gap {lhs:e} below {rhs:e}")));
                }
            }
        }
        Ok((true, "100 instances x 10 perturbations".to_string()))
    })();
    out.push(CheckResult::from_result("strong-convexity", strong));

    let invariance = (|| {
        for _ in 0..50 {
            let k = rng.random_range(2..5);
            let g = random_gradients(&mut rng, 3, k);
            let base = stationarity_measure(&g, 1e-12)?;
            for c in [0.5, 3.0] {
                let scaled = stationarity_measure(&g.scaled(c), 1e-12)?;
                if (scaled - c * c * base).abs() > 1e-9 * (1.0 + c * c * base) {
                    return Ok((false, format!("scale {c}: {scaled} vs {}", c * c * base)));
                }
            }
            let perm: Vec<usize> = (0..k).rev().collect();
            let permuted = stationarity_measure(&g.permuted(&perm)?, 1e-12)?;
            if (permuted - base).abs() > 1e-9 * (1.0 + base) {
                return Ok((false, format!("permutation: {permuted} vs {base}")));
            }
        }
        Ok((true, "50 instances".to_string()))
    })();
    out.push(CheckResult::from_result("scale-and-permutation-invariance", invariance));

    let grid = (|| {
        let res = 1000;
        for _ in 0..20 {
            let k = rng.random_range(1..4);
            let g = random_gradients(&mut rng, 2, k);
            let exact = stationarity_measure(&g, 1e-12)?;
            let grid = grid_min_stationarity(&g, res);
            let op = crate::subproblem::spectral_radius(&g.gram()).sqrt();
            let delta = (k as f64).sqrt() / res as f64;
            let allowed = 2.0 * exact.sqrt() * op * delta + (op * delta).powi(2) + 1e-12;
            if exact > grid + 1e-12 || grid - exact > allowed {
                return Ok((false, format!("solver {exact:e} vs grid {grid:e}")));
            }
        }
        Ok((true, "20 instances at resolution 1e-3".to_string()))
    })();
    out.push(CheckResult::from_result("grid-oracle-equivalence", grid));
    out
}

fn sample_point(rng: &mut ChaCha8Rng, problem: &ObjectiveProblem) -> ParamPoint {
    ParamPoint::new(uniform_vec(rng, problem.dim(), -3.0, 3.0)).expect("finite draws")
}

/// Checks the smoothness lemmas on `problems`: gradient consistency, the
/// phi bound, the declared-smoothness (Hessian) bound, the remainder bound
/// and continuity of the regularized weights.
pub fn verify_lemmas_on(problems: &[ObjectiveProblem]) -> Vec<CheckResult> {
    let mut out = Vec::new();
    for (idx, problem) in problems.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ (100 + idx as u64));
        let tag = format!("{}[m={}]", problem.name(), problem.dim());
        let xs: Vec<ParamPoint> = (0..100).map(|_| sample_point(&mut rng, problem)).collect();

        let fd = (|| {
            for x in &xs {
                let g = problem.eval_gradients(x)?;
                let approx = problem.finite_diff_gradients(x, 1e-5)?;
                let scale = 1.0 + g.columns().map(norm).fold(0.0, f64::max);
                for k in 0..g.tasks() {
                    let err = euclidean_distance(g.column(k), approx.column(k));
                    if err > 1e-5 * scale {
                        return Ok((false, format!("task {} at {:?}: error {err:e}", k + 1, x.as_slice())));
                    }
                }
            }
            Ok((true, "100 points".to_string()))
        })();
        out.push(CheckResult::from_result(&format!("gradient-consistency/{tag}"), fd));

        let hess = check_hessian_bound(problem, &xs).map(|r| {
            let detail = match r.failures().next() {
                Some(e) => format!(
                    "problem-definition error: declared smoothness understates the Hessian \
                     (task {}, |hess| = {:e} > ell = {:e})",
                    e.task + 1,
                    e.lhs,
                    e.rhs
                ),
                None => format!("min margin {:.3e}", r.min_margin()),
            };
            (r.passed, detail)
        });
        out.push(CheckResult::from_result(&format!("hessian-bound/{tag}"), hess));

        let phi = match check_phi_bound(problem, &xs) {
            Err(Error::Unsupported(msg)) => {
                CheckResult::new(format!("phi-bound/{tag}"), true, format!("skipped: {msg}"))
            }
            other => CheckResult::from_result(
                &format!("phi-bound/{tag}"),
                other.map(|r| {
                    let detail = match r.failures().next() {
                        Some(e) => format!(
                            "task {} at point {}: phi = {:e} > gap {:e}",
                            e.task + 1,
                            e.point,
                            e.lhs,
                            e.rhs
                        ),
                        None => format!("min margin {:.3e}", r.min_margin()),
                    };
                    (r.passed, detail)
                }),
            ),
        };
        out.push(phi);

        let remainder = (|| {
            let ell = problem.smoothness();
            for x in &xs {
                let w = random_weights(problem.num_tasks(), &mut rng)?;
                let g = problem.eval_gradients(x)?;
                let d = g.combine(w.as_slice())?;
                let d_norm = norm(&d);
                let norms = g.column_norms();
                let m = norms.iter().copied().fold(0.0, f64::max);
                // keep the step inside the radius where the smoothness bound applies
                let alpha = if d_norm > 0.0 {
                    1e-2f64.min(1.0 / (ell.ell(m + 1.0) * d_norm))
                } else {
                    1e-2
                };
                let r = remainder_measure(problem, x, &w, alpha)?;
                for (i, ri) in r.iter().enumerate() {
                    let bound = alpha * alpha * ell.ell(norms[i] + 1.0) * d_norm * d_norm / 2.0;
                    if *ri > bound + 1e-12 * (1.0 + bound) {
                        return Ok((
                            false,
                            format!("task {} at {:?}: R = {ri:e} > {bound:e}", i + 1, x.as_slice()),
                        ));
                    }
                }
            }
            Ok((true, "100 states".to_string()))
        })();
        out.push(CheckResult::from_result(&format!("remainder-bound/{tag}"), remainder));

        let continuity = (|| {
            let rho = 0.1;
            let ell = problem.smoothness();
            let k = problem.num_tasks() as f64;
            let mut worst = 0.0f64;
            for x in xs.iter().take(30) {
                let g0 = problem.eval_gradients(x)?;
                let m0 = g0.column_norms().into_iter().fold(0.0, f64::max);
                let mut dir = normal_vec(&mut rng, problem.dim());
                let n = norm(&dir);
                dir.iter_mut().for_each(|v| *v /= n);
                let mut radius = 0.5 / ell.ell(m0 + 1.0);
                let (g1, m) = loop {
                    let g1 = problem.eval_gradients(&x.stepped(-radius, &dir)?)?;
                    let m = m0.max(g1.column_norms().into_iter().fold(0.0, f64::max));
                    if radius <= 1.0 / ell.ell(m + 1.0) {
                        break (g1, m);
                    }
                    radius /= 2.0;
                };
                let w0 = solve_w_rho(&g0, rho, 1e-12, 1_000_000)?.weights;
                let w1 = solve_w_rho(&g1, rho, 1e-12, 1_000_000)?.weights;
                let bound = 2.0 / rho * k * m * ell.ell(m + 1.0) * radius;
                let dist = w0.distance(&w1);
                worst = worst.max(dist / bound);
                if dist > bound + 1e-10 {
                    return Ok((false, format!("{dist:e} > {bound:e} at {:?}", x.as_slice())));
                }
            }
            Ok((
                true,
                format!("30 steps, worst ratio {worst:.3e}; M is the observed gradient bound, valid locally"),
            ))
        })();
        out.push(CheckResult::from_result(
            &format!("weight-continuity/{tag}"),
            continuity,
        ));
    }
    out
}

fn hand_examples() -> Result<(bool, String)> {
    let p = ObjectiveProblem::from_tasks(
        "shifted-pair",
        vec![
            Task::Quadratic { center: vec![0.0] },
            Task::Quadratic { center: vec![1.0] },
        ],
    )?;
    let state = OptimizerState::new(ParamPoint::new(vec![0.0])?, WeightVector::new(vec![0.5, 0.5])?);
    let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 1);
    let s = gsmgrad_step(&p, &state, &cfg)?;
    if euclidean_distance(s.w.as_slice(), &[0.525, 0.475]) > 1e-12 || (s.x.as_slice()[0] - 0.05).abs() > 1e-12 {
        return Ok((
            false,
            format!("gsmgrad step gave x = {:?}, w = {:?}", s.x.as_slice(), s.w.as_slice()),
        ));
    }
    let fa_cfg = OptimizerConfig {
        algorithm: Algorithm::GsmgradFa,
        ..cfg
    };
    let s = gsmgrad_fa_step(&p, &state, &fa_cfg)?;
    if euclidean_distance(s.w.as_slice(), &[0.525, 0.475]) > 1e-12 {
        return Ok((false, format!("fa step gave w = {:?}", s.w.as_slice())));
    }
    let g = GradientMatrix::from_columns(vec![vec![1.0, 0.0], vec![0.0, 1.0]])?;
    let path = warm_start_path(&g, &WeightVector::vertex(2, 0)?, 0.1, 0.4, 1)?;
    if euclidean_distance(path[1].as_slice(), &[0.78, 0.22]) > 1e-12 {
        return Ok((false, format!("warm start gave {:?}", path[1].as_slice())));
    }
    Ok((true, "gsmgrad, fa and warm-start steps".to_string()))
}

fn optimizer_checks() -> Vec<CheckResult> {
    let mut out = vec![CheckResult::from_result("hand-examples", hand_examples())];
    let quad = builtin_problem(BuiltinProblem::QuadraticPair, 2, &ProblemParams::new()).expect("valid");
    let quartic = builtin_problem(BuiltinProblem::QuarticPair, 2, &ProblemParams::new()).expect("valid");
    let exp = builtin_problem(BuiltinProblem::ExpPair, 1, &ProblemParams::new()).expect("valid");

    let single = (|| {
        let p = ObjectiveProblem::from_tasks("one", vec![Task::Quartic { center: vec![0.5] }])?;
        let cfg = OptimizerConfig::new(Algorithm::Gsmgrad, 0.05, 0.1, 500);
        let mut s = OptimizerState::new(ParamPoint::new(vec![2.0])?, uniform_weights(1)?);
        let mut x = 2.0f64;
        for _ in 0..500 {
            s = gsmgrad_step(&p, &s, &cfg)?;
            x -= 0.05 * (x - 0.5).powi(3);
            if (s.x.as_slice()[0] - x).abs() > 1e-12 {
                return Ok((false, format!("diverged from scalar descent at t = {}", s.t)));
            }
        }
        Ok((true, "500 steps".to_string()))
    })();
    out.push(CheckResult::from_result("single-task-reduction", single));

    let zero_noise = (|| {
        let det = OptimizerConfig::new(Algorithm::Gsmgrad, 0.01, 0.1, 200);
        let sto = OptimizerConfig {
            algorithm: Algorithm::Sgsmgrad,
            ..det.clone()
        };
        let noise = NoiseModel::gaussian(0.0, 7);
        let mut a = OptimizerState::new(quartic.default_start(), uniform_weights(2)?);
        let mut b = a.clone();
        for _ in 0..200 {
            a = gsmgrad_step(&quartic, &a, &det)?;
            b = sgsmgrad_step(&quartic, &b, &sto, &noise)?;
            if euclidean_distance(a.x.as_slice(), b.x.as_slice()) > 1e-12 || a.w.distance(&b.w) > 1e-12 {
                return Ok((false, format!("trajectories split at t = {}", a.t)));
            }
        }
        Ok((true, "200 steps".to_string()))
    })();
    out.push(CheckResult::from_result("zero-noise-equivalence", zero_noise));

    let determinism = (|| {
        let cfg = OptimizerConfig::new(Algorithm::Sgsmgrad, 0.05, 0.05, 300);
        let noise = NoiseModel::gaussian(0.1, 11);
        let a = run(&quad, &cfg, Some(&noise), &RunOptions::default())?;
        let b = run(&quad, &cfg, Some(&noise), &RunOptions::default())?;
        Ok((a.records == b.records, "repeated stochastic run".to_string()))
    })();
    out.push(CheckResult::from_result("determinism", determinism));

    let runs: Vec<(&str, &ObjectiveProblem, OptimizerConfig)> = vec![
        (
            "quadratic-pair",
            &quad,
            OptimizerConfig::new(Algorithm::Gsmgrad, 0.1, 0.1, 1000).with_rho(1e-4),
        ),
        (
            "quartic-pair",
            &quartic,
            OptimizerConfig::new(Algorithm::Gsmgrad, 0.01, 0.01, 1000).with_rho(1e-3),
        ),
        (
            "exp-pair",
            &exp,
            OptimizerConfig::new(Algorithm::Gsmgrad, 0.02, 0.02, 1000).with_rho(1e-3),
        ),
        (
            "quartic-pair-fa",
            &quartic,
            OptimizerConfig::new(Algorithm::GsmgradFa, 0.01, 0.01, 1000).with_rho(1e-3),
        ),
    ];
    for (name, problem, cfg) in runs {
        let check = (|| {
            let out = run(problem, &cfg, None, &RunOptions::default())?;
            if let Some(e) = out.error {
                return Ok((false, format!("run failed: {e}")));
            }
            if out.records.iter().any(|r| !is_in_simplex(&r.w)) {
                return Ok((false, "weights left the simplex".to_string()));
            }
            let n = out.records.len() as f64;
            let avg_sq = out.records.iter().map(|r| r.ca_distance.powi(2)).sum::<f64>() / n;
            let avg_st = out.records.iter().map(|r| r.stationarity_wt).sum::<f64>() / n;
            if avg_sq > avg_st + 1e-10 {
                return Ok((
                    false,
                    format!("mean CA distance^2 {avg_sq:e} > mean stationarity {avg_st:e}"),
                ));
            }
            let blocks: Vec<f64> = out
                .records
                .chunks(100)
                .map(|c| c.iter().map(|r| r.stationarity_wt).sum::<f64>() / c.len() as f64)
                .collect();
            if let Some(w) = blocks.windows(2).find(|w| w[1] > 1.1 * w[0] + 1e-15) {
                return Ok((false, format!("window mean rose from {:e} to {:e}", w[0], w[1])));
            }
            Ok((
                true,
                format!("mean CA distance^2 {avg_sq:.3e} <= mean stationarity {avg_st:.3e}"),
            ))
        })();
        out.push(CheckResult::from_result(
            &format!("trajectory-properties/{name}"),
            check,
        ));
    }

    let contraction = (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(SEED ^ 2);
        for _ in 0..20 {
            let g = random_gradients(&mut rng, 3, 3);
            let rho = 0.05;
            let bp = default_beta_prime(&g, rho);
            let star = solve_gram(&g.gram(), rho, SolverSettings::REFERENCE)?.weights;
            let path = warm_start_path(&g, &random_weights(3, &mut rng)?, rho, bp, 200)?;
            let ratio = 1.0 - rho * bp;
            for pair in path.windows(2) {
                let (a, b) = (pair[0].distance(&star), pair[1].distance(&star));
                if b > ratio * a + 1e-11 {
                    return Ok((false, format!("distance {b:e} > {ratio} x {a:e}")));
                }
            }
        }
        Ok((true, "20 instances x 200 steps".to_string()))
    })();
    out.push(CheckResult::from_result("warm-start-contraction", contraction));

    let fa = (|| {
        let cfg = OptimizerConfig::new(Algorithm::GsmgradFa, 1e-3, 0.05, 500).with_rho(1e-3);
        let det = OptimizerConfig {
            algorithm: Algorithm::Gsmgrad,
            ..cfg.clone()
        };
        let ell = quartic.smoothness();
        let mut s = OptimizerState::new(quartic.default_start(), uniform_weights(2)?);
        for _ in 0..500 {
            let a = gsmgrad_fa_step(&quartic, &s, &cfg)?;
            let b = gsmgrad_step(&quartic, &s, &det)?;
            let g = quartic.eval_gradients(&s.x)?;
            let m = g.column_norms().into_iter().fold(0.0, f64::max);
            let d = dot(&b.last_direction, &b.last_direction);
            let bound = cfg.beta * cfg.alpha * ell.ell(m + 1.0) * d / 2.0;
            let diff = a.w.distance(&b.w);
            if diff > bound + 1e-14 {
                return Ok((false, format!("t = {}: {diff:e} > {bound:e}", s.t)));
            }
            s = a;
        }
        Ok((true, "500 steps on quartic-pair".to_string()))
    })();
    out.push(CheckResult::from_result("fa-exact-consistency", fa));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::SmoothnessDescriptor;

    #[test]
    fn suite_tags() {
        assert_eq!("lemmas".parse::<Suite>().unwrap(), Suite::Lemmas);
        assert!("everything"
            .parse::<Suite>()
            .unwrap_err()
            .to_string()
            .contains("optimizers"));
    }

    #[test]
    fn simplex_suite_passes() {
        let r = verify(Suite::Simplex);
        assert!(r.passed, "{:#?}", r.checks);
    }

    #[test]
    fn injected_wrong_smoothness_is_caught() {
        let base = builtin_problem(BuiltinProblem::QuarticPair, 1, &ProblemParams::new()).unwrap();
        let faulty = base.clone().with_smoothness(SmoothnessDescriptor::Scaled {
            factor: 0.1,
            inner: Box::new(base.smoothness().clone()),
        });
        let checks = verify_lemmas_on(&[faulty]);
        let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        assert!(
            failed
                .iter()
                .any(|n| n.starts_with("phi-bound") || n.starts_with("hessian-bound")),
            "{checks:#?}"
        );
        let hess = checks.iter().find(|c| c.name.starts_with("hessian-bound")).unwrap();
        assert!(hess.detail.contains("problem-definition"));
    }
}
