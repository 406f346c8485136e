//! Post-processing instruments over traces and problems: CA-distance traces,
//! local-smoothness scans, Taylor remainders, the smoothness-bound checks and
//! the multi-task `Delta m%` metric.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{norm, ObjectiveProblem, ParamPoint};
use crate::optimizers::IterationRecord;
use crate::simplex::{euclidean_distance, WeightVector};
use crate::subproblem::{solve_gram, SolverSettings};

/// Slack allowed by the smoothness-bound checks.
pub const BOUND_SLACK: f64 = 1e-9;

/// Steps shorter than this are skipped by [`local_smoothness_scan`].
pub const MIN_SCAN_STEP: f64 = 1e-12;

/// Per-record CA distances and their running mean of squares.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaTrace {
    pub t: Vec<usize>,
    pub distances: Vec<f64>,
    /// `running_mean_sq[j] = mean(distances[..=j]^2)`.
    pub running_mean_sq: Vec<f64>,
}

impl CaTrace {
    pub fn max(&self) -> f64 {
        self.distances.iter().copied().fold(0.0, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.distances.is_empty() {
            0.0
        } else {
            self.distances.iter().sum::<f64>() / self.distances.len() as f64
        }
    }

    pub fn mean_sq(&self) -> f64 {
        self.running_mean_sq.last().copied().unwrap_or(0.0)
    }
}

/// Recomputes the CA distance of every record with the reference solver at
/// tolerance `tol`.
pub fn ca_trace(problem: &ObjectiveProblem, records: &[IterationRecord], tol: f64) -> Result<CaTrace> {
    let settings = SolverSettings {
        tol,
        ..SolverSettings::REFERENCE
    };
    let mut out = CaTrace {
        t: Vec::with_capacity(records.len()),
        distances: Vec::with_capacity(records.len()),
        running_mean_sq: Vec::with_capacity(records.len()),
    };
    let mut sum_sq = 0.0;
    for (j, r) in records.iter().enumerate() {
        let x = ParamPoint::new(r.x.clone())?;
        let w = WeightVector::new(r.w.clone())?;
        let g = problem.eval_gradients(&x)?;
        let star = solve_gram(&g.gram(), 0.0, settings)?;
        let dist = euclidean_distance(&g.combine(w.as_slice())?, &g.combine(star.weights.as_slice())?);
        sum_sq += dist * dist;
        out.t.push(r.t);
        out.distances.push(dist);
        out.running_mean_sq.push(sum_sq / (j + 1) as f64);
    }
    Ok(out)
}

/// One point of the local-smoothness versus gradient-norm scatter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessSample {
    pub t: usize,
    pub task: usize,
    pub grad_norm: f64,
    pub local_l: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessScan {
    pub samples: Vec<SmoothnessSample>,
    /// Consecutive record pairs skipped because the iterate barely moved.
    pub skipped: usize,
}

/// Estimates local smoothness along a trajectory by differencing consecutive
/// records: `||grad f_i(x_{t+1}) - grad f_i(x_t)|| / ||x_{t+1} - x_t||`,
/// paired with `||grad f_i(x_t)||`.
pub fn local_smoothness_scan(problem: &ObjectiveProblem, records: &[IterationRecord]) -> Result<SmoothnessScan> {
    let mut scan = SmoothnessScan {
        samples: Vec::new(),
        skipped: 0,
    };
    let mut prev: Option<(&IterationRecord, crate::objectives::GradientMatrix)> = None;
    for r in records {
        let g = problem.eval_gradients(&ParamPoint::new(r.x.clone())?)?;
        if let Some((pr, pg)) = &prev {
            let step = euclidean_distance(&r.x, &pr.x);
            if step <= MIN_SCAN_STEP {
                scan.skipped += 1;
            } else {
                for k in 0..g.tasks() {
                    scan.samples.push(SmoothnessSample {
                        t: pr.t,
                        task: k,
                        grad_norm: norm(pg.column(k)),
                        local_l: euclidean_distance(g.column(k), pg.column(k)) / step,
                    });
                }
            }
        }
        prev = Some((r, g));
    }
    Ok(scan)
}

/// Least-squares line `local_l ~ slope * grad_norm + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub pearson: f64,
    pub n: usize,
}

pub fn fit_line(samples: &[SmoothnessSample]) -> Result<LineFit> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::invalid(format!(
            "need at least 2 samples to fit a line, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = samples.iter().map(|s| s.grad_norm).sum::<f64>() / nf;
    let my = samples.iter().map(|s| s.local_l).sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for s in samples {
        let dx = s.grad_norm - mx;
        let dy = s.local_l - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::invalid("gradient norms are all equal; slope undefined"));
    }
    let slope = sxy / sxx;
    let pearson = if syy > 0.0 { sxy / (sxx * syy).sqrt() } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept: my - slope * mx,
        pearson,
        n,
    })
}

/// Taylor remainder of one parameter step along `d = grad F(x) w`:
/// `R_i = f_i(x - alpha d) - f_i(x) + alpha grad f_i(x)^T d`.
pub fn remainder_measure(problem: &ObjectiveProblem, x: &ParamPoint, w: &WeightVector, alpha: f64) -> Result<Vec<f64>> {
    if alpha < 0.0 || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    let g = problem.eval_gradients(x)?;
    let d = g.combine(w.as_slice())?;
    let before = problem.eval_values(x)?;
    let after = problem.eval_values(&x.stepped(alpha, &d)?)?;
    let slopes = g.project_onto_tasks(&d)?;
    Ok((0..g.tasks())
        .map(|i| after.0[i] - before.0[i] + alpha * slopes[i])
        .collect())
}

/// Per-method metric values against a baseline row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    metrics: Vec<String>,
    higher_is_better: Vec<bool>,
    baseline: Vec<f64>,
    methods: BTreeMap<String, Vec<f64>>,
}

impl MetricTable {
    pub fn new(metrics: Vec<String>, higher_is_better: Vec<bool>, baseline: Vec<f64>) -> Result<Self> {
        if metrics.is_empty() {
            return Err(Error::invalid("metric table needs at least one metric"));
        }
        if higher_is_better.len() != metrics.len() || baseline.len() != metrics.len() {
            return Err(Error::invalid(format!(
                "{} metrics but {} direction flags and {} baseline values",
                metrics.len(),
                higher_is_better.len(),
                baseline.len()
            )));
        }
        Ok(MetricTable {
            metrics,
            higher_is_better,
            baseline,
            methods: BTreeMap::new(),
        })
    }

    pub fn add_method(&mut self, name: impl Into<String>, values: Vec<f64>) -> Result<()> {
        let name = name.into();
        if values.len() != self.metrics.len() {
            return Err(Error::invalid(format!(
                "method `{name}` has {} values, table has {} metrics",
                values.len(),
                self.metrics.len()
            )));
        }
        self.methods.insert(name, values);
        Ok(())
    }

    pub fn metrics(&self) -> &[String] {
        &self.metrics
    }

    pub fn methods(&self) -> impl Iterator<Item = &str> {
        self.methods.keys().map(String::as_str)
    }
}

/// Mean signed relative change of `method` against the baseline, in percent.
/// Metrics where higher is better count with a flipped sign, so lower is
/// better overall.
pub fn delta_m(table: &MetricTable, method: &str) -> Result<f64> {
    let row = table
        .methods
        .get(method)
        .ok_or_else(|| Error::invalid(format!("no method `{method}` in metric table")))?;
    let mut total = 0.0;
    for (k, name) in table.metrics.iter().enumerate() {
        let base = table.baseline[k];
        if base == 0.0 {
            return Err(Error::invalid(format!("baseline value of metric `{name}` is zero")));
        }
        let sign = if table.higher_is_better[k] { -1.0 } else { 1.0 };
        total += sign * (row[k] - base) / base;
    }
    Ok(total / table.metrics.len() as f64 * 100.0)
}

/// One task at one probe point of a bound check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEntry {
    pub point: usize,
    pub task: usize,
    /// Left-hand side of the inequality.
    pub lhs: f64,
    /// Right-hand side of the inequality.
    pub rhs: f64,
    pub passed: bool,
}

impl BoundEntry {
    pub fn margin(&self) -> f64 {
        self.rhs - self.lhs
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub entries: Vec<BoundEntry>,
    pub passed: bool,
}

impl BoundReport {
    fn from_entries(entries: Vec<BoundEntry>) -> Self {
        let passed = entries.iter().all(|e| e.passed);
        BoundReport { entries, passed }
    }

    pub fn failures(&self) -> impl Iterator<Item = &BoundEntry> {
        self.entries.iter().filter(|e| !e.passed)
    }

    pub fn min_margin(&self) -> f64 {
        self.entries
            .iter()
            .map(BoundEntry::margin)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Checks `phi(||grad f_i(x)||) <= f_i(x) - f_i*` with the problem's declared
/// smoothness, at every point and task.
pub fn check_phi_bound(problem: &ObjectiveProblem, xs: &[ParamPoint]) -> Result<BoundReport> {
    let lower = problem
        .lower_bounds()
        .ok_or_else(|| Error::Unsupported(format!("problem `{}` has no known lower bounds", problem.name())))?;
    let ell = problem.smoothness();
    let mut entries = Vec::with_capacity(xs.len() * problem.num_tasks());
    for (p, x) in xs.iter().enumerate() {
        let values = problem.eval_values(x)?;
        let g = problem.eval_gradients(x)?;
        for (k, (v, lb)) in values.0.iter().zip(lower).enumerate() {
            let lhs = ell.phi(norm(g.column(k)));
            let rhs = v - lb;
            entries.push(BoundEntry {
                point: p,
                task: k,
                lhs,
                rhs,
                passed: rhs - lhs >= -BOUND_SLACK,
            });
        }
    }
    Ok(BoundReport::from_entries(entries))
}

/// Checks the defining inequality `||hess f_i(x)|| <= ell(||grad f_i(x)||)` of
/// the declared smoothness. A failure means the problem's descriptor is wrong.
pub fn check_hessian_bound(problem: &ObjectiveProblem, xs: &[ParamPoint]) -> Result<BoundReport> {
    let ell = problem.smoothness();
    let mut entries = Vec::with_capacity(xs.len() * problem.num_tasks());
    for (p, x) in xs.iter().enumerate() {
        let g = problem.eval_gradients(x)?;
        let hess = problem.hessian_norms(x)?;
        for (k, h) in hess.into_iter().enumerate() {
            let rhs = ell.ell(norm(g.column(k)));
            entries.push(BoundEntry {
                point: p,
                task: k,
                lhs: h,
                rhs,
                passed: rhs - h >= -BOUND_SLACK * (1.0 + rhs.abs()),
            });
        }
    }
    Ok(BoundReport::from_entries(entries))
}
