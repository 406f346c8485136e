//! Step-size suggestions from the convergence-rate orders, instantiated with
//! unit constants.
//!
//! The constants hidden in the rates are not recoverable, so the output is a
//! starting point, not a guarantee.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::{ObjectiveProblem, ParamPoint, SmoothnessDescriptor};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Deterministic, small average CA distance.
    DetAverage,
    /// Deterministic with warm start, small CA distance at every iteration.
    DetIterwise,
    /// Stochastic, small average CA distance.
    StochAverage,
    /// Stochastic with warm start and mini-batches.
    StochIterwise,
}

impl Regime {
    pub const ALL: [Regime; 4] = [
        Regime::DetAverage,
        Regime::DetIterwise,
        Regime::StochAverage,
        Regime::StochIterwise,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Regime::DetAverage => "det-average",
            Regime::DetIterwise => "det-iterwise",
            Regime::StochAverage => "stoch-average",
            Regime::StochIterwise => "stoch-iterwise",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Regime::ALL.into_iter().find(|r| r.tag() == s).ok_or_else(|| {
            let tags: Vec<_> = Regime::ALL.iter().map(|r| r.tag()).collect();
            Error::invalid(format!("unknown regime `{s}`; valid regimes are {}", tags.join(", ")))
        })
    }
}

/// Gradient-norm scale `M` and smoothness `ell` of a problem.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemScale {
    pub gradient_bound: f64,
    pub smoothness: SmoothnessDescriptor,
}

impl Default for ProblemScale {
    /// `M = 1`, `ell = 1`.
    fn default() -> Self {
        ProblemScale {
            gradient_bound: 1.0,
            smoothness: SmoothnessDescriptor::Constant { l: 1.0 },
        }
    }
}

impl ProblemScale {
    /// `M = sup { z : phi(z) <= F }` with `F = max_i (f_i(x0) - f_i*) + 1`.
    ///
    /// Along a run that does not increase any `f_i` beyond `F`, the bound
    /// `phi(||grad f_i||) <= f_i - f_i*` keeps every task gradient below `M`.
    pub fn from_problem(problem: &ObjectiveProblem, x0: &ParamPoint) -> Result<Self> {
        let lower = problem
            .lower_bounds()
            .ok_or_else(|| Error::Unsupported(format!("problem `{}` has no known lower bounds", problem.name())))?;
        let values = problem.eval_values(x0)?;
        let gap = values
            .as_slice()
            .iter()
            .zip(lower)
            .map(|(v, lb)| v - lb)
            .fold(0.0, f64::max)
            + 1.0;
        let phi = |z: f64| problem.smoothness().phi(z);
        let mut hi = 1.0;
        while phi(hi) <= gap {
            hi *= 2.0;
            if !hi.is_finite() || hi > 1e300 {
                return Err(Error::Unsupported(
                    "phi stays bounded; no finite gradient bound exists".to_string(),
                ));
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if phi(mid) <= gap {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(ProblemScale {
            gradient_bound: lo,
            smoothness: problem.smoothness().clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparamSuggestion {
    pub regime: Regime,
    pub epsilon: f64,
    pub alpha: f64,
    pub beta: f64,
    pub rho: f64,
    pub horizon: u64,
    pub warm_start_iters: Option<u64>,
    pub beta_prime: Option<f64>,
    pub batch: Option<u64>,
    /// Set when the horizon is too large to run.
    pub impractical: bool,
}

/// Horizons above this are flagged as impractical.
pub const PRACTICAL_HORIZON: u64 = 100_000_000;

/// `ceil` that ignores round-off just above an integer, so `1 / 0.1^2`
/// gives 100 rather than 101.
fn ceil_count(v: f64) -> u64 {
    let r = v.round();
    if (v - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as u64
    } else {
        v.ceil() as u64
    }
}

pub fn suggest_hyperparams(epsilon: f64, regime: Regime, scale: Option<&ProblemScale>) -> Result<HyperparamSuggestion> {
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::invalid(format!("epsilon must be finite and > 0, got {epsilon}")));
    }
    let default = ProblemScale::default();
    let scale = scale.unwrap_or(&default);
    let m = scale.gradient_bound;
    if m <= 0.0 || !m.is_finite() {
        return Err(Error::invalid(format!("gradient bound must be > 0, got {m}")));
    }
    let eps2 = epsilon * epsilon;
    let inv_m2 = 1.0 / (m * m);

    let mut s = match regime {
        Regime::DetAverage => {
            let beta = inv_m2;
            let alpha = inv_m2.min(1.0 / (m * scale.smoothness.ell(m + 1.0)));
            HyperparamSuggestion {
                regime,
                epsilon,
                alpha,
                beta,
                rho: eps2,
                horizon: ceil_count((1.0 / (alpha * eps2)).max(1.0 / (beta * eps2))),
                warm_start_iters: None,
                beta_prime: None,
                batch: None,
                impractical: false,
            }
        }
        Regime::DetIterwise | Regime::StochIterwise => HyperparamSuggestion {
            regime,
            epsilon,
            alpha: epsilon.powi(9),
            beta: epsilon.powi(4),
            rho: eps2,
            horizon: ceil_count(epsilon.powi(-11)),
            warm_start_iters: Some(ceil_count(1.0 / eps2)),
            beta_prime: Some(inv_m2),
            batch: (regime == Regime::StochIterwise).then(|| ceil_count(epsilon.powi(-6))),
            impractical: false,
        },
        Regime::StochAverage => HyperparamSuggestion {
            regime,
            epsilon,
            alpha: eps2,
            beta: eps2,
            rho: eps2,
            horizon: ceil_count(epsilon.powi(-4)),
            warm_start_iters: None,
            beta_prime: None,
            batch: None,
            impractical: false,
        },
    };
    s.impractical = s.horizon > PRACTICAL_HORIZON;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{builtin_problem, BuiltinProblem, ProblemParams};

    fn rel(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs()
    }

    #[test]
    fn det_average_unit_scale() {
        let s = suggest_hyperparams(0.1, Regime::DetAverage, None).unwrap();
        assert!(rel(s.rho, 1e-2));
        let bound = (1.0 / (s.alpha * 1e-2)).max(1.0 / (s.beta * 1e-2));
        assert!(s.horizon as f64 >= bound);
        assert_eq!(s.horizon, 100);
        assert!(!s.impractical);
    }

    #[test]
    fn det_iterwise_orders() {
        let s = suggest_hyperparams(0.1, Regime::DetIterwise, None).unwrap();
        assert!(rel(s.alpha, 1e-9));
        assert!(rel(s.beta, 1e-4));
        assert!(rel(s.rho, 1e-2));
        assert_eq!(s.warm_start_iters, Some(100));
        assert_eq!(s.horizon, 100_000_000_000);
        assert!(s.impractical);
    }

    #[test]
    fn stoch_iterwise_batch() {
        let s = suggest_hyperparams(0.3, Regime::StochIterwise, None).unwrap();
        assert_eq!(s.batch, Some(1372));
    }

    #[test]
    fn stoch_average_orders() {
        let s = suggest_hyperparams(0.1, Regime::StochAverage, None).unwrap();
        assert!(rel(s.alpha, 1e-2) && rel(s.beta, 1e-2) && rel(s.rho, 1e-2));
        assert_eq!(s.horizon, 10_000);
    }

    #[test]
    fn bad_epsilon() {
        for e in [0.0, -0.1, f64::NAN, f64::INFINITY] {
            assert!(suggest_hyperparams(e, Regime::DetAverage, None).is_err());
        }
        assert!("det"
            .parse::<Regime>()
            .unwrap_err()
            .to_string()
            .contains("stoch-iterwise"));
    }

    #[test]
    fn quadratic_scale_inverts_phi() {
        // phi(z) = z^2 / 2 for ell = 1; from x0 = 3 the larger gap is 8.
        let p = builtin_problem(BuiltinProblem::QuadraticPair, 1, &ProblemParams::new()).unwrap();
        let scale = ProblemScale::from_problem(&p, &p.default_start()).unwrap();
        assert!((scale.gradient_bound - 18f64.sqrt()).abs() < 1e-9);
        assert!(scale.gradient_bound >= 4.0);
    }

    #[test]
    fn scale_needs_lower_bounds() {
        let p = builtin_problem(BuiltinProblem::QuadraticPair, 1, &ProblemParams::new())
            .unwrap()
            .without_lower_bounds();
        assert!(ProblemScale::from_problem(&p, &p.default_start()).is_err());
    }
}
