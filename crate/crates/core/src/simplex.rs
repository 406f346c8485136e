//! Geometry of the probability simplex `W = {w in R^K : w >= 0, sum(w) = 1}`.
//!
//! Every write to a weight vector in this crate goes through
//! [`project_simplex`], so a [`WeightVector`] always satisfies the simplex
//! invariants at tolerance [`SIMPLEX_TOL`].

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used for membership checks (non-negativity and unit sum).
pub const SIMPLEX_TOL: f64 = 1e-12;

/// A point on the probability simplex: one non-negative weight per objective.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    /// Validates membership in the simplex.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::invalid("weight vector must have K >= 1 entries"));
        }
        if !is_in_simplex(&entries) {
            return Err(Error::invalid(format!("{entries:?} is not on the probability simplex")));
        }
        Ok(WeightVector(entries))
    }

    /// The `k`-th vertex `e_k` of the simplex with `len` entries.
    pub fn vertex(len: usize, k: usize) -> Result<Self> {
        if k >= len {
            return Err(Error::invalid(format!("vertex {k} out of range for K={len}")));
        }
        let mut e = vec![0.0; len];
        e[k] = 1.0;
        Ok(WeightVector(e))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean distance to another weight vector.
    pub fn distance(&self, other: &WeightVector) -> f64 {
        euclidean_distance(&self.0, &other.0)
    }
}

impl TryFrom<Vec<f64>> for WeightVector {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        WeightVector::new(v)
    }
}

impl From<WeightVector> for Vec<f64> {
    fn from(w: WeightVector) -> Self {
        w.0
    }
}

impl std::ops::Index<usize> for WeightVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Membership test at [`SIMPLEX_TOL`].
pub fn is_in_simplex(v: &[f64]) -> bool {
    !v.is_empty() && v.iter().all(|x| x.is_finite() && *x >= 0.0) && (v.iter().sum::<f64>() - 1.0).abs() <= SIMPLEX_TOL
}

pub(crate) fn euclidean_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Euclidean projection onto the simplex.
///
/// Sort-based threshold method: with `u` the entries sorted in decreasing
/// order, the support size is the largest `r` with
/// `u_r > (u_1 + ... + u_r - 1) / r`, and the result is `max(v - tau, 0)`.
/// Inputs already on the simplex are returned unchanged, which makes the
/// projection exactly idempotent.
pub fn project_simplex(v: &[f64]) -> Result<WeightVector> {
    if v.is_empty() {
        return Err(Error::invalid("cannot project a vector with K = 0"));
    }
    if let Some(i) = v.iter().position(|x| !x.is_finite()) {
        return Err(Error::invalid(format!(
            "cannot project non-finite entry {} at index {i}",
            v[i]
        )));
    }
    if is_in_simplex(v) {
        return Ok(WeightVector(v.to_vec()));
    }

    // Stable sort keeps ties in original index order.
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&a, &b| v[b].total_cmp(&v[a]));

    let mut cumsum = 0.0;
    let mut tau = 0.0;
    for (r, &i) in order.iter().enumerate() {
        cumsum += v[i];
        let candidate = (cumsum - 1.0) / (r + 1) as f64;
        if v[i] - candidate > 0.0 {
            tau = candidate;
        } else {
            break;
        }
    }

    // Clamp then renormalize so the output passes membership at strict tolerance.
    let mut w: Vec<f64> = v.iter().map(|x| (x - tau).max(0.0)).collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(WeightVector(w))
}

/// Uniform weights `1/K`.
pub fn uniform_weights(k: usize) -> Result<WeightVector> {
    if k == 0 {
        return Err(Error::invalid("uniform weights need K >= 1"));
    }
    Ok(WeightVector(vec![1.0 / k as f64; k]))
}

/// Draws a point uniformly from the simplex (normalized exponentials).
pub fn random_weights<R: Rng + ?Sized>(k: usize, rng: &mut R) -> Result<WeightVector> {
    if k == 0 {
        return Err(Error::invalid("random weights need K >= 1"));
    }
    let draws: Vec<f64> = (0..k).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    project_simplex(&draws.iter().map(|x| x / total).collect::<Vec<_>>())
}

/// Largest K accepted by [`brute_force_projection`].
pub const BRUTE_FORCE_MAX_K: usize = 4;

/// Nearest point to `v` among the simplex grid `{n / resolution : sum(n) = resolution}`.
///
/// Test oracle only: the grid has `C(resolution + K - 1, K - 1)` points.
pub fn brute_force_projection(v: &[f64], resolution: usize) -> Result<WeightVector> {
    let k = v.len();
    if k == 0 {
        return Err(Error::invalid("cannot project a vector with K = 0"));
    }
    if k > BRUTE_FORCE_MAX_K {
        return Err(Error::Unsupported(format!(
            "brute-force projection supports K <= {BRUTE_FORCE_MAX_K}, got K = {k}"
        )));
    }
    if resolution < 10 {
        return Err(Error::invalid(format!(
            "grid resolution must be >= 10, got {resolution}"
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("cannot project non-finite entries"));
    }

    let h = 1.0 / resolution as f64;
    let mut counts = vec![0usize; k];
    let mut best = vec![0usize; k];
    let mut best_dist = f64::INFINITY;
    grid_search(v, h, resolution, 0, 0.0, &mut counts, &mut best, &mut best_dist);
    Ok(WeightVector(best.iter().map(|&n| n as f64 * h).collect()))
}

#[allow(clippy::too_many_arguments)]
fn grid_search(
    v: &[f64],
    h: f64,
    remaining: usize,
    depth: usize,
    partial: f64,
    counts: &mut [usize],
    best: &mut [usize],
    best_dist: &mut f64,
) {
    let k = v.len();
    if partial >= *best_dist {
        return;
    }
    if depth == k - 1 {
        counts[depth] = remaining;
        let diff = remaining as f64 * h - v[depth];
        let dist = partial + diff * diff;
        if dist < *best_dist {
            *best_dist = dist;
            best.copy_from_slice(counts);
        }
        return;
    }
    for n in 0..=remaining {
        counts[depth] = n;
        let diff = n as f64 * h - v[depth];
        grid_search(
            v,
            h,
            remaining - n,
            depth + 1,
            partial + diff * diff,
            counts,
            best,
            best_dist,
        );
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// KKT oracle: enumerate every support set S, shift v_S onto the
    /// hyperplane and keep the candidate satisfying primal and dual feasibility.
    fn kkt_projection(v: &[f64]) -> Vec<f64> {
        let k = v.len();
        for mask in 1u32..(1 << k) {
            let support: Vec<usize> = (0..k).filter(|i| mask & (1 << i) != 0).collect();
            let tau = (support.iter().map(|&i| v[i]).sum::<f64>() - 1.0) / support.len() as f64;
            let primal = support.iter().all(|&i| v[i] - tau >= 0.0);
            let dual = (0..k).filter(|i| mask & (1 << i) == 0).all(|i| v[i] - tau <= 0.0);
            if primal && dual {
                return (0..k)
                    .map(|i| if mask & (1 << i) != 0 { v[i] - tau } else { 0.0 })
                    .collect();
            }
        }
        unreachable!("projection always exists")
    }

    fn assert_close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn projection_examples_match_kkt_oracle() {
        let cases: [(&[f64], [f64; 3]); 4] = [
            (&[0.5, 0.5], [0.5, 0.5, f64::NAN]),
            (&[1.2, -0.2], [1.0, 0.0, f64::NAN]),
            (&[0.4, 0.4], [0.5, 0.5, f64::NAN]),
            (&[3.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
        ];
        for (input, frozen) in cases {
            let expected = &frozen[..input.len()];
            assert_close(&kkt_projection(input), expected, 1e-15);
            assert_close(project_simplex(input).unwrap().as_slice(), expected, 1e-12);
        }
    }

    #[test]
    fn in_simplex_input_is_returned_unchanged() {
        let v = [0.2, 0.3, 0.5];
        assert_eq!(project_simplex(&v).unwrap().as_slice(), &v);
    }

    #[test]
    fn projection_rejects_bad_input() {
        assert!(matches!(project_simplex(&[]), Err(Error::InvalidArgument(_))));
        assert!(matches!(
            project_simplex(&[0.5, f64::NAN]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            project_simplex(&[f64::INFINITY, 0.0]),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn ties_are_deterministic() {
        let a = project_simplex(&[2.0, 2.0, 2.0]).unwrap();
        assert_close(a.as_slice(), &[1.0 / 3.0; 3], 1e-15);
        let b = project_simplex(&[5.0, 5.0, -1.0]).unwrap();
        assert_eq!(b.as_slice(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn uniform_weights_examples() {
        assert_eq!(uniform_weights(1).unwrap().as_slice(), &[1.0]);
        assert_eq!(uniform_weights(2).unwrap().as_slice(), &[0.5, 0.5]);
        assert_eq!(uniform_weights(4).unwrap().as_slice(), &[0.25; 4]);
        assert!(uniform_weights(0).is_err());
    }

    #[test]
    fn brute_force_examples() {
        let p = brute_force_projection(&[1.2, -0.2], 1000).unwrap();
        assert_close(p.as_slice(), &[1.0, 0.0], 1e-3);
        for res in [10, 37, 1000] {
            let p = brute_force_projection(&[0.5, 0.5], res * 2).unwrap();
            assert_close(p.as_slice(), &[0.5, 0.5], 1e-15);
        }
        let p = brute_force_projection(&[0.4, 0.4], 1000).unwrap();
        assert_close(p.as_slice(), &[0.5, 0.5], 1e-3);
    }

    #[test]
    fn brute_force_rejects_large_k_and_coarse_grids() {
        assert!(matches!(
            brute_force_projection(&[0.2; 5], 10),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            brute_force_projection(&[0.5, 0.5], 9),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.6, 0.5]).is_err());
        assert!(WeightVector::new(vec![1.1, -0.1]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        let json = serde_json::to_string(&WeightVector::vertex(3, 1).unwrap()).unwrap();
        assert_eq!(json, "[0.0,1.0,0.0]");
        assert!(serde_json::from_str::<WeightVector>("[0.7,0.7]").is_err());
    }

    fn vector_strategy() -> impl Strategy<Value = Vec<f64>> {
        (1usize..=6).prop_flat_map(|k| proptest::collection::vec(-5.0f64..5.0, k))
    }

    proptest! {
        #[test]
        fn projection_matches_kkt_and_is_valid(v in vector_strategy()) {
            let w = project_simplex(&v).unwrap();
            prop_assert!(is_in_simplex(w.as_slice()));
            let oracle = kkt_projection(&v);
            for (a, b) in w.as_slice().iter().zip(&oracle) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }

        #[test]
        fn projection_is_idempotent(v in vector_strategy()) {
            let once = project_simplex(&v).unwrap();
            let twice = project_simplex(once.as_slice()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn projection_is_non_expansive(
            (u, v) in (1usize..=6).prop_flat_map(|k| (
                proptest::collection::vec(-5.0f64..5.0, k),
                proptest::collection::vec(-5.0f64..5.0, k),
            ))
        ) {
            let pu = project_simplex(&u).unwrap();
            let pv = project_simplex(&v).unwrap();
            prop_assert!(pu.distance(&pv) <= euclidean_distance(&u, &v) + 1e-12);
        }
    }
}
