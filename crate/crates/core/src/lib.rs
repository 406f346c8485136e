//! Conflict-avoidant multi-objective gradient methods for objectives whose
//! smoothness grows with the gradient norm.
//!
//! The crate provides the building blocks (simplex projection, the
//! regularized weight subproblem, test problems with smoothness descriptors),
//! the single-loop optimizers and their warm start, diagnostics, and an
//! experiment harness that reads TOML configs and writes CSV traces.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod objectives;
pub mod optimizers;
pub mod simplex;
pub mod subproblem;

pub use diagnostics::{
    ca_trace, check_hessian_bound, check_phi_bound, delta_m, fit_line, local_smoothness_scan, remainder_measure,
    BoundReport, CaTrace, LineFit, MetricTable, SmoothnessSample, SmoothnessScan,
};
pub use error::{Error, Result};
pub use objectives::{
    builtin_problem, BuiltinProblem, CallCounts, GradientMatrix, GramMatrix, NoiseDistribution, NoiseModel,
    ObjectiveProblem, ObjectiveValues, ParamPoint, ProblemParams, SmoothnessDescriptor, Task,
};
pub use optimizers::{
    gsmgrad_fa_step, gsmgrad_step, run, sgsmgrad_step, warm_start, Algorithm, IterationRecord, OptimizerConfig,
    OptimizerState, RunOptions, RunOutcome,
};
pub use simplex::{is_in_simplex, project_simplex, uniform_weights, WeightVector};
pub use subproblem::{
    ca_direction, ca_distance, solve_w_rho, stationarity_measure, SolverSettings, SubproblemSolution,
};
