//! Objective-set oracles and the built-in generalized-smooth benchmark problems.
//!
//! A problem bundles `K` task functions over `R^m`. Every built-in task has
//! an analytic gradient, an analytic Hessian spectral norm, a known lower
//! bound and a smoothness descriptor `l(.)` with `||H_f(x)|| <= l(||grad f(x)||)`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Floor added to the smoothness function of the built-in problems so that
/// `l(0) > 0`.
pub const ELL_FLOOR: f64 = 1e-3;

/// Model parameters `x in R^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamPoint(Vec<f64>);

impl ParamPoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::invalid("parameter point must have m >= 1 coordinates"));
        }
        if let Some(i) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::invalid(format!(
                "parameter coordinate {i} is not finite ({})",
                coords[i]
            )));
        }
        Ok(ParamPoint(coords))
    }

    /// Constant point `(value, ..., value)`.
    pub fn splat(dim: usize, value: f64) -> Result<Self> {
        ParamPoint::new(vec![value; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `x - step * direction`.
    pub fn stepped(&self, step: f64, direction: &[f64]) -> Result<Self> {
        if direction.len() != self.dim() {
            return Err(Error::invalid(format!(
                "direction has dimension {}, point has {}",
                direction.len(),
                self.dim()
            )));
        }
        let coords: Vec<f64> = self.0.iter().zip(direction).map(|(x, d)| x - step * d).collect();
        if let Some(task) = coords.iter().position(|c| !c.is_finite()) {
            return Err(Error::NumericOverflow {
                task,
                context: "parameter update left the finite range".into(),
            });
        }
        Ok(ParamPoint(coords))
    }
}

impl TryFrom<Vec<f64>> for ParamPoint {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        ParamPoint::new(v)
    }
}

impl From<ParamPoint> for Vec<f64> {
    fn from(p: ParamPoint) -> Self {
        p.0
    }
}

/// Objective values `F(x) = (f_1(x), ..., f_K(x))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValues(pub Vec<f64>);

impl ObjectiveValues {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// The `m x K` matrix of per-task gradients; column `k` is `grad f_k(x)`.
///
/// Stored column-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientMatrix {
    dim: usize,
    tasks: usize,
    data: Vec<f64>,
}

impl GradientMatrix {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let tasks = columns.len();
        if tasks == 0 {
            return Err(Error::invalid("gradient matrix needs K >= 1 columns"));
        }
        let dim = columns[0].len();
        if dim == 0 {
            return Err(Error::invalid("gradient matrix needs m >= 1 rows"));
        }
        let mut data = Vec::with_capacity(dim * tasks);
        for (k, col) in columns.into_iter().enumerate() {
            if col.len() != dim {
                return Err(Error::invalid(format!(
                    "column {k} has {} rows, expected {dim}",
                    col.len()
                )));
            }
            if col.iter().any(|g| !g.is_finite()) {
                return Err(Error::invalid(format!("column {k} has non-finite entries")));
            }
            data.extend(col);
        }
        Ok(GradientMatrix { dim, tasks, data })
    }

    fn from_raw(dim: usize, tasks: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), dim * tasks);
        GradientMatrix { dim, tasks, data }
    }

    /// Parameter dimension `m`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of tasks `K`.
    pub fn tasks(&self) -> usize {
        self.tasks
    }

    pub fn column(&self, k: usize) -> &[f64] {
        &self.data[k * self.dim..(k + 1) * self.dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column_norms(&self) -> Vec<f64> {
        self.columns().map(norm).collect()
    }

    /// `G w`, the weighted combination of task gradients.
    pub fn combine(&self, w: &[f64]) -> Result<Vec<f64>> {
        if w.len() != self.tasks {
            return Err(Error::invalid(format!(
                "weight vector has {} entries, gradient matrix has {} tasks",
                w.len(),
                self.tasks
            )));
        }
        let mut out = vec![0.0; self.dim];
        for (col, wk) in self.columns().zip(w) {
            for (o, g) in out.iter_mut().zip(col) {
                *o += wk * g;
            }
        }
        Ok(out)
    }

    /// `G^T d`, the inner product of each task gradient with `d`.
    pub fn project_onto_tasks(&self, d: &[f64]) -> Result<Vec<f64>> {
        if d.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector has dimension {}, gradient matrix has {} rows",
                d.len(),
                self.dim
            )));
        }
        Ok(self.columns().map(|col| dot(col, d)).collect())
    }

    /// Gram matrix `G^T G` (K x K, row-major).
    pub fn gram(&self) -> GramMatrix {
        let k = self.tasks;
        let mut data = vec![0.0; k * k];
        for i in 0..k {
            for j in i..k {
                let v = dot(self.column(i), self.column(j));
                data[i * k + j] = v;
                data[j * k + i] = v;
            }
        }
        GramMatrix { size: k, data }
    }

    /// `c * G`.
    pub fn scaled(&self, c: f64) -> Self {
        GradientMatrix::from_raw(self.dim, self.tasks, self.data.iter().map(|g| c * g).collect())
    }

    /// Columns reordered so that new column `i` is old column `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let mut seen = vec![false; self.tasks];
        if perm.len() != self.tasks
            || perm
                .iter()
                .any(|&p| p >= self.tasks || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::invalid(format!(
                "{perm:?} is not a permutation of 0..{}",
                self.tasks
            )));
        }
        let cols = perm.iter().map(|&p| self.column(p).to_vec()).collect();
        GradientMatrix::from_columns(cols)
    }

    fn add_noise(&mut self, stddev: f64, rng: &mut ChaCha8Rng) {
        for g in &mut self.data {
            let z: f64 = StandardNormal.sample(rng);
            *g += stddev * z;
        }
    }
}

/// Symmetric `K x K` matrix `G^T G`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct GramMatrix {
    size: usize,
    data: Vec<f64>,
}

impl GramMatrix {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.size + j]
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.data.chunks_exact(self.size).map(|row| dot(row, w)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.size).map(|i| self.get(i, i)).sum()
    }

    /// `w^T A w`.
    pub fn quadratic_form(&self, w: &[f64]) -> f64 {
        dot(&self.apply(w), w)
    }

    pub(crate) fn raw(&self) -> &[f64] {
        &self.data
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// The smoothness function `l(u)` bounding the Hessian norm by a function
/// of the gradient norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SmoothnessDescriptor {
    /// `l(u) = L` (standard L-smoothness).
    Constant { l: f64 },
    /// `l(u) = L0 + L1 u`.
    Affine { l0: f64, l1: f64 },
    /// `l(u) = L0 + L1 u^gamma`.
    Power { l0: f64, l1: f64, gamma: f64 },
    /// Pointwise maximum of several descriptors.
    Max { parts: Vec<SmoothnessDescriptor> },
    /// `factor * l(u)`; used to inject a deliberately wrong descriptor.
    Scaled {
        factor: f64,
        inner: Box<SmoothnessDescriptor>,
    },
}

impl SmoothnessDescriptor {
    pub fn ell(&self, u: f64) -> f64 {
        match self {
            SmoothnessDescriptor::Constant { l } => *l,
            SmoothnessDescriptor::Affine { l0, l1 } => l0 + l1 * u,
            SmoothnessDescriptor::Power { l0, l1, gamma } => l0 + l1 * u.powf(*gamma),
            SmoothnessDescriptor::Max { parts } => parts.iter().map(|p| p.ell(u)).fold(f64::NEG_INFINITY, f64::max),
            SmoothnessDescriptor::Scaled { factor, inner } => factor * inner.ell(u),
        }
    }

    /// `phi(a) = a^2 / (2 l(2a))`.
    pub fn phi(&self, a: f64) -> f64 {
        a * a / (2.0 * self.ell(2.0 * a))
    }

    pub fn family(&self) -> &'static str {
        match self {
            SmoothnessDescriptor::Constant { .. } => "constant",
            SmoothnessDescriptor::Affine { .. } => "affine",
            SmoothnessDescriptor::Power { .. } => "power",
            SmoothnessDescriptor::Max { .. } => "max",
            SmoothnessDescriptor::Scaled { .. } => "scaled",
        }
    }

    /// Checks `l > 0` and non-decreasing on the given grid of gradient norms.
    pub fn validate_on(&self, grid: &[f64]) -> Result<()> {
        let mut prev = f64::NEG_INFINITY;
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        for &u in &sorted {
            let l = self.ell(u);
            if l <= 0.0 || !l.is_finite() {
                return Err(Error::invalid(format!("l({u}) = {l} is not positive and finite")));
            }
            if l < prev {
                return Err(Error::invalid(format!("l is decreasing at u = {u}")));
            }
            prev = l;
        }
        Ok(())
    }
}

/// One task function of a built-in problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Task {
    /// `1/2 ||x - c||^2`.
    Quadratic { center: Vec<f64> },
    /// `1/4 sum_j (x_j - c_j)^4`.
    Quartic { center: Vec<f64> },
    /// `exp(a^T x) + offset`.
    Exponential { direction: Vec<f64>, offset: f64 },
}

impl Task {
    fn dim(&self) -> usize {
        match self {
            Task::Quadratic { center } | Task::Quartic { center } => center.len(),
            Task::Exponential { direction, .. } => direction.len(),
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Task::Quadratic { center } => 0.5 * x.iter().zip(center).map(|(a, c)| (a - c) * (a - c)).sum::<f64>(),
            Task::Quartic { center } => 0.25 * x.iter().zip(center).map(|(a, c)| (a - c).powi(4)).sum::<f64>(),
            Task::Exponential { direction, offset } => dot(direction, x).exp() + offset,
        }
    }

    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Task::Quadratic { center } => {
                for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
                    *o = a - c;
                }
            }
            Task::Quartic { center } => {
                for ((o, a), c) in out.iter_mut().zip(x).zip(center) {
                    *o = (a - c).powi(3);
                }
            }
            Task::Exponential { direction, .. } => {
                let e = dot(direction, x).exp();
                for (o, a) in out.iter_mut().zip(direction) {
                    *o = a * e;
                }
            }
        }
    }

    /// Spectral norm of the Hessian at `x`.
    pub fn hessian_norm(&self, x: &[f64]) -> f64 {
        match self {
            Task::Quadratic { .. } => 1.0,
            Task::Quartic { center } => x
                .iter()
                .zip(center)
                .map(|(a, c)| 3.0 * (a - c) * (a - c))
                .fold(0.0, f64::max),
            Task::Exponential { direction, .. } => dot(direction, direction) * dot(direction, x).exp(),
        }
    }

    /// `inf_x f(x)`.
    pub fn lower_bound(&self) -> f64 {
        match self {
            Task::Quadratic { .. } | Task::Quartic { .. } => 0.0,
            Task::Exponential { offset, .. } => *offset,
        }
    }

    /// A smoothness descriptor valid for this task alone.
    pub fn smoothness(&self) -> SmoothnessDescriptor {
        match self {
            Task::Quadratic { .. } => SmoothnessDescriptor::Constant { l: 1.0 },
            // ||H|| = 3 max r_j^2 = 3 (max |r_j|^3)^(2/3) <= 3 ||grad||^(2/3)
            Task::Quartic { .. } => SmoothnessDescriptor::Power {
                l0: ELL_FLOOR,
                l1: 3.0,
                gamma: 2.0 / 3.0,
            },
            // H = a a^T e^(a^T x), so ||H|| = ||a|| ||grad||
            Task::Exponential { direction, .. } => SmoothnessDescriptor::Affine {
                l0: ELL_FLOOR,
                l1: norm(direction),
            },
        }
    }
}

/// Names of the built-in problems.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuiltinProblem {
    QuadraticPair,
    QuarticPair,
    ExpPair,
    MixedSmooth,
}

impl BuiltinProblem {
    pub const ALL: [BuiltinProblem; 4] = [
        BuiltinProblem::QuadraticPair,
        BuiltinProblem::QuarticPair,
        BuiltinProblem::ExpPair,
        BuiltinProblem::MixedSmooth,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinProblem::QuadraticPair => "quadratic-pair",
            BuiltinProblem::QuarticPair => "quartic-pair",
            BuiltinProblem::ExpPair => "exp-pair",
            BuiltinProblem::MixedSmooth => "mixed-smooth",
        }
    }

    fn params(self) -> &'static [(&'static str, f64)] {
        match self {
            BuiltinProblem::QuadraticPair | BuiltinProblem::QuarticPair => &[("c1", -1.0), ("c2", 1.0)],
            BuiltinProblem::ExpPair => &[("scale", 1.0), ("offset", 0.0)],
            BuiltinProblem::MixedSmooth => &[("center", 1.0), ("scale", 1.0), ("offset", 0.0)],
        }
    }
}

impl fmt::Display for BuiltinProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinProblem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinProblem::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            let names: Vec<_> = BuiltinProblem::ALL.iter().map(|p| p.name()).collect();
            Error::invalid(format!("unknown problem `{s}`; valid names are {}", names.join(", ")))
        })
    }
}

/// Oracle call tallies, for checking per-step call budgets.
#[derive(Debug, Default)]
pub struct CallCounts {
    values: AtomicU64,
    gradients: AtomicU64,
}

impl CallCounts {
    pub fn values(&self) -> u64 {
        self.values.load(Ordering::Relaxed)
    }

    pub fn gradients(&self) -> u64 {
        self.gradients.load(Ordering::Relaxed)
    }

    pub fn reset(&self) {
        self.values.store(0, Ordering::Relaxed);
        self.gradients.store(0, Ordering::Relaxed);
    }
}

impl Clone for CallCounts {
    fn clone(&self) -> Self {
        CallCounts {
            values: AtomicU64::new(self.values()),
            gradients: AtomicU64::new(self.gradients()),
        }
    }
}

/// A set of `K` objectives over `R^m` with value and gradient oracles.
#[derive(Clone, Debug)]
pub struct ObjectiveProblem {
    name: String,
    dim: usize,
    tasks: Vec<Task>,
    lower_bounds: Option<Vec<f64>>,
    smoothness: SmoothnessDescriptor,
    default_start: Vec<f64>,
    calls: CallCounts,
}

impl ObjectiveProblem {
    /// Builds a problem from task functions. The problem-level smoothness
    /// descriptor is the pointwise max of the task descriptors.
    pub fn from_tasks(name: impl Into<String>, tasks: Vec<Task>) -> Result<Self> {
        if tasks.is_empty() {
            return Err(Error::invalid("a problem needs at least one task"));
        }
        let dim = tasks[0].dim();
        if dim == 0 {
            return Err(Error::invalid("tasks must have dimension m >= 1"));
        }
        if let Some(k) = tasks.iter().position(|t| t.dim() != dim) {
            return Err(Error::invalid(format!(
                "task {k} has dimension {}, expected {dim}",
                tasks[k].dim()
            )));
        }
        let mut parts: Vec<SmoothnessDescriptor> = Vec::new();
        for t in &tasks {
            let s = t.smoothness();
            if !parts.contains(&s) {
                parts.push(s);
            }
        }
        let smoothness = if parts.len() == 1 {
            parts.pop().unwrap()
        } else {
            SmoothnessDescriptor::Max { parts }
        };
        let lower_bounds = Some(tasks.iter().map(Task::lower_bound).collect());
        Ok(ObjectiveProblem {
            name: name.into(),
            dim,
            tasks,
            lower_bounds,
            smoothness,
            default_start: vec![0.0; dim],
            calls: CallCounts::default(),
        })
    }

    pub fn with_smoothness(mut self, smoothness: SmoothnessDescriptor) -> Self {
        self.smoothness = smoothness;
        self
    }

    pub fn without_lower_bounds(mut self) -> Self {
        self.lower_bounds = None;
        self
    }

    pub fn with_default_start(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.dim {
            return Err(Error::invalid("default start has the wrong dimension"));
        }
        self.default_start = x0;
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_tasks(&self) -> usize {
        self.tasks.len()
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn lower_bounds(&self) -> Option<&[f64]> {
        self.lower_bounds.as_deref()
    }

    pub fn smoothness(&self) -> &SmoothnessDescriptor {
        &self.smoothness
    }

    pub fn default_start(&self) -> ParamPoint {
        ParamPoint(self.default_start.clone())
    }

    pub fn calls(&self) -> &CallCounts {
        &self.calls
    }

    fn check_dim(&self, x: &ParamPoint) -> Result<()> {
        if x.dim() != self.dim {
            return Err(Error::invalid(format!(
                "point has dimension {}, problem `{}` has m = {}",
                x.dim(),
                self.name,
                self.dim
            )));
        }
        Ok(())
    }

    /// `F(x)`.
    pub fn eval_values(&self, x: &ParamPoint) -> Result<ObjectiveValues> {
        self.check_dim(x)?;
        self.calls.values.fetch_add(1, Ordering::Relaxed);
        let values = self
            .tasks
            .iter()
            .enumerate()
            .map(|(k, t)| {
                let v = t.value(x.as_slice());
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::NumericOverflow {
                        task: k,
                        context: format!("value is {v}"),
                    })
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ObjectiveValues(values))
    }

    /// `grad F(x)`, column `k` is the analytic gradient of task `k`.
    pub fn eval_gradients(&self, x: &ParamPoint) -> Result<GradientMatrix> {
        self.check_dim(x)?;
        self.calls.gradients.fetch_add(1, Ordering::Relaxed);
        self.analytic_gradients(x)
    }

    fn analytic_gradients(&self, x: &ParamPoint) -> Result<GradientMatrix> {
        let m = self.dim;
        let mut data = vec![0.0; m * self.tasks.len()];
        for (k, (t, col)) in self.tasks.iter().zip(data.chunks_exact_mut(m)).enumerate() {
            t.gradient_into(x.as_slice(), col);
            if col.iter().any(|g| !g.is_finite()) {
                return Err(Error::NumericOverflow {
                    task: k,
                    context: "gradient is not finite".into(),
                });
            }
        }
        Ok(GradientMatrix::from_raw(m, self.tasks.len(), data))
    }

    /// Stochastic estimate `grad F(x) + E` of a mini-batch of size `batch`.
    ///
    /// Each task column receives i.i.d. Gaussian noise with
    /// `E ||e_k||^2 = sigma^2 / batch`. The draw is a pure function of
    /// `(noise.seed, t, draw_index, x)`.
    pub fn stochastic_gradients(
        &self,
        x: &ParamPoint,
        noise: &NoiseModel,
        t: u64,
        draw_index: u64,
        batch: usize,
    ) -> Result<GradientMatrix> {
        if batch == 0 {
            return Err(Error::invalid("mini-batch size must be >= 1"));
        }
        noise.validate()?;
        let mut g = self.eval_gradients(x)?;
        if noise.sigma > 0.0 {
            let stddev = noise.sigma / ((self.dim * batch) as f64).sqrt();
            g.add_noise(stddev, &mut noise.rng(t, draw_index));
        }
        Ok(g)
    }

    /// Central-difference gradients, for checking the analytic oracle.
    pub fn finite_diff_gradients(&self, x: &ParamPoint, h: f64) -> Result<GradientMatrix> {
        self.check_dim(x)?;
        if h <= 0.0 || !h.is_finite() {
            return Err(Error::invalid(format!("finite-difference step must be > 0, got {h}")));
        }
        if !(1e-8..=1e-2).contains(&h) {
            return Err(Error::invalid(format!(
                "finite-difference step {h} outside [1e-8, 1e-2]"
            )));
        }
        let m = self.dim;
        let mut data = vec![0.0; m * self.tasks.len()];
        let mut probe = x.as_slice().to_vec();
        for j in 0..m {
            probe[j] = x.as_slice()[j] + h;
            let plus = self.eval_values(&ParamPoint(probe.clone()))?;
            probe[j] = x.as_slice()[j] - h;
            let minus = self.eval_values(&ParamPoint(probe.clone()))?;
            probe[j] = x.as_slice()[j];
            for k in 0..self.tasks.len() {
                data[k * m + j] = (plus.0[k] - minus.0[k]) / (2.0 * h);
            }
        }
        Ok(GradientMatrix::from_raw(m, self.tasks.len(), data))
    }

    /// Per-task Hessian spectral norms at `x`.
    pub fn hessian_norms(&self, x: &ParamPoint) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        Ok(self.tasks.iter().map(|t| t.hessian_norm(x.as_slice())).collect())
    }
}

/// Distribution of the stochastic gradient noise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseDistribution {
    #[default]
    Gaussian,
}

/// Additive gradient noise with per-task second moment `sigma^2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma: f64,
    #[serde(default)]
    pub distribution: NoiseDistribution,
    pub seed: u64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64, seed: u64) -> Self {
        NoiseModel {
            sigma,
            distribution: NoiseDistribution::Gaussian,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma < 0.0 || !self.sigma.is_finite() {
            return Err(Error::invalid(format!(
                "noise sigma must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }

    /// Counter-based stream: one independent ChaCha stream per `(t, draw_index)`.
    fn rng(&self, t: u64, draw_index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(splitmix64(
            t ^ splitmix64(draw_index.wrapping_add(0x5851_F42D_4C95_7F2D)),
        ));
        rng
    }
}

pub(crate) fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Problem parameters keyed by name.
pub type ProblemParams = BTreeMap<String, f64>;

/// Instantiates a built-in problem in dimension `dim`.
///
/// * `quadratic-pair`: `f_k = 1/2 ||x - c_k 1||^2`, params `c1`, `c2`.
/// * `quartic-pair`: `f_k = 1/4 sum_j (x_j - c_k)^4`, params `c1`, `c2`.
/// * `exp-pair`: `f_{1,2} = exp(+-(s/sqrt(m)) 1^T x) + offset`, params `scale`, `offset`.
/// * `mixed-smooth`: a quartic task centred at `center` and an exponential
///   task `exp((s/sqrt(m)) 1^T x) + offset`.
pub fn builtin_problem(name: BuiltinProblem, dim: usize, params: &ProblemParams) -> Result<ObjectiveProblem> {
    if dim == 0 {
        return Err(Error::invalid("problem dimension must be >= 1"));
    }
    let known = name.params();
    if let Some(key) = params.keys().find(|k| !known.iter().any(|(n, _)| n == k)) {
        let names: Vec<_> = known.iter().map(|(n, _)| *n).collect();
        return Err(Error::invalid(format!(
            "unknown parameter `{key}` for {name}; valid parameters are {}",
            names.join(", ")
        )));
    }
    let get = |key: &str| -> Result<f64> {
        let default = known.iter().find(|(n, _)| *n == key).map(|(_, v)| *v).unwrap();
        let v = params.get(key).copied().unwrap_or(default);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::invalid(format!("parameter `{key}` must be finite")))
        }
    };
    let splat = |v: f64| vec![v; dim];
    let root_m = (dim as f64).sqrt();

    let (tasks, start) = match name {
        BuiltinProblem::QuadraticPair => (
            vec![
                Task::Quadratic {
                    center: splat(get("c1")?),
                },
                Task::Quadratic {
                    center: splat(get("c2")?),
                },
            ],
            splat(3.0),
        ),
        BuiltinProblem::QuarticPair => (
            vec![
                Task::Quartic {
                    center: splat(get("c1")?),
                },
                Task::Quartic {
                    center: splat(get("c2")?),
                },
            ],
            splat(1.5),
        ),
        BuiltinProblem::ExpPair => {
            let a = get("scale")? / root_m;
            let offset = get("offset")?;
            (
                vec![
                    Task::Exponential {
                        direction: splat(a),
                        offset,
                    },
                    Task::Exponential {
                        direction: splat(-a),
                        offset,
                    },
                ],
                splat(1.0 / root_m),
            )
        }
        BuiltinProblem::MixedSmooth => {
            let a = get("scale")? / root_m;
            (
                vec![
                    Task::Quartic {
                        center: splat(get("center")?),
                    },
                    Task::Exponential {
                        direction: splat(a),
                        offset: get("offset")?,
                    },
                ],
                splat(2.0),
            )
        }
    };
    ObjectiveProblem::from_tasks(name.name(), tasks)?.with_default_start(start)
}
