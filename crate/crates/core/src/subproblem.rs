//! Simplex-constrained quadratic subproblems.
//!
//! The weight problem is
//!
//! ```text
//! min_{w in W} J(w) = 1/2 ||G w||^2 + rho/2 ||w||^2
//! ```
//!
//! solved by projected gradient descent with step `1 / (lambda_max(G^T G) + rho)`.
//! With `rho = 0` the minimizer may not be unique but `G w*` is, so consumers
//! only rely on `G w*`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{dot, norm, splitmix64, GradientMatrix, GramMatrix};
use crate::simplex::{project_simplex, uniform_weights, WeightVector};

/// Power iterations used to estimate `lambda_max(G^T G)`.
pub const POWER_ITERATIONS: usize = 50;

/// Tolerance and iteration budget for the weight-problem solver.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverSettings {
    /// High-precision mode used as the test oracle and by diagnostics.
    pub const REFERENCE: SolverSettings = SolverSettings {
        tol: 1e-12,
        max_iter: 1_000_000,
    };

    pub const FAST: SolverSettings = SolverSettings {
        tol: 1e-6,
        max_iter: 10_000,
    };
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings::REFERENCE
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubproblemSolution {
    pub weights: WeightVector,
    /// `J(w) = 1/2 ||G w||^2 + rho/2 ||w||^2` at the returned weights.
    pub objective_value: f64,
    pub iterations_used: usize,
    /// Whether the fixed-point residual reached the requested tolerance.
    pub converged: bool,
}

/// Estimates the largest eigenvalue of a PSD Gram matrix.
///
/// The start vector is seeded from the matrix entries so results are
/// deterministic for a given input.
pub fn spectral_radius(gram: &GramMatrix) -> f64 {
    let k = gram.size();
    let mut seed = 0x1234_5678_9ABC_DEF0u64;
    for v in gram.raw() {
        seed = splitmix64(seed ^ v.to_bits());
    }
    let mut v: Vec<f64> = (0..k)
        .map(|_| {
            seed = splitmix64(seed);
            0.5 + (seed >> 11) as f64 / (1u64 << 53) as f64
        })
        .collect();
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let av = gram.apply(&v);
        let n = norm(&av);
        if n == 0.0 {
            return 0.0;
        }
        lambda = dot(&v, &av) / dot(&v, &v);
        v = av.into_iter().map(|x| x / n).collect();
    }
    lambda.min(gram.trace()).max(0.0)
}

/// One projected-gradient step `Pi_W(w - step (A w + rho w))` on a fixed Gram matrix.
pub fn pgd_step(gram: &GramMatrix, w: &WeightVector, rho: f64, step: f64) -> Result<WeightVector> {
    let aw = gram.apply(w.as_slice());
    let moved: Vec<f64> = w
        .as_slice()
        .iter()
        .zip(&aw)
        .map(|(wi, gi)| wi - step * (gi + rho * wi))
        .collect();
    project_simplex(&moved)
}

fn objective(gram: &GramMatrix, w: &[f64], rho: f64) -> f64 {
    0.5 * gram.quadratic_form(w) + 0.5 * rho * dot(w, w)
}

/// Solves the regularized weight problem from uniform weights.
pub fn solve_w_rho(g: &GradientMatrix, rho: f64, tol: f64, max_iter: usize) -> Result<SubproblemSolution> {
    if g.columns().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("gradient matrix has non-finite entries"));
    }
    solve_gram(&g.gram(), rho, SolverSettings { tol, max_iter })
}

/// Same as [`solve_w_rho`] on a precomputed Gram matrix.
pub fn solve_gram(gram: &GramMatrix, rho: f64, settings: SolverSettings) -> Result<SubproblemSolution> {
    if rho < 0.0 || !rho.is_finite() {
        return Err(Error::invalid(format!("rho must be finite and >= 0, got {rho}")));
    }
    if settings.tol.is_nan() || settings.tol <= 0.0 {
        return Err(Error::invalid(format!("tolerance must be > 0, got {}", settings.tol)));
    }
    if settings.max_iter == 0 {
        return Err(Error::invalid("max_iter must be >= 1"));
    }
    if gram.raw().iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Gram matrix has non-finite entries"));
    }

    let mut w = uniform_weights(gram.size())?;
    let curvature = spectral_radius(gram) + rho;
    if curvature == 0.0 {
        // J is identically zero; every weight vector is optimal.
        return Ok(SubproblemSolution {
            weights: w,
            objective_value: 0.0,
            iterations_used: 0,
            converged: true,
        });
    }
    let step = 1.0 / curvature;

    for it in 0..settings.max_iter {
        let next = pgd_step(gram, &w, rho, step)?;
        if w.distance(&next) <= settings.tol {
            let objective_value = objective(gram, w.as_slice(), rho);
            return Ok(SubproblemSolution {
                weights: w,
                objective_value,
                iterations_used: it,
                converged: true,
            });
        }
        w = next;
    }
    let objective_value = objective(gram, w.as_slice(), rho);
    Ok(SubproblemSolution {
        weights: w,
        objective_value,
        iterations_used: settings.max_iter,
        converged: false,
    })
}

/// `min_{w in W} ||G w||^2`; zero exactly at Pareto stationary points.
pub fn stationarity_measure(g: &GradientMatrix, tol: f64) -> Result<f64> {
    let sol = solve_w_rho(g, 0.0, tol, SolverSettings::REFERENCE.max_iter)?;
    let d = g.combine(sol.weights.as_slice())?;
    Ok(dot(&d, &d))
}

/// Update direction `G w`.
pub fn ca_direction(g: &GradientMatrix, w: &WeightVector) -> Result<Vec<f64>> {
    g.combine(w.as_slice())
}

/// Distance `||G w - G w*||` between the direction induced by `w` and the
/// conflict-avoidant direction.
pub fn ca_distance(g: &GradientMatrix, w: &WeightVector, tol: f64) -> Result<f64> {
    let d = ca_direction(g, w)?;
    let star = solve_w_rho(g, 0.0, tol, SolverSettings::REFERENCE.max_iter)?;
    let d_star = g.combine(star.weights.as_slice())?;
    Ok(crate::simplex::euclidean_distance(&d, &d_star))
}
