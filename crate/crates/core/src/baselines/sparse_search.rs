//! Support recovery for sparse linear rewards with nonnegative entries by
//! bisection with normalized indicator probes.
//!
//! Each probe plays `1_S/√|S|` against the raw oracle `a ↦ ⟨θ, a⟩` and so
//! reveals `Σ_{i∈S} θ_i`. A set with positive sum is split in two; only the
//! left half is probed, the right half's sum is inferred by subtraction.
//! Sign cancellation inside a set cannot be seen by this scheme; negative
//! probe or inferred sums reveal it and abort the search.

use crate::error::{Result, ViolinError};
use crate::linalg::dot;
use serde::{Deserialize, Serialize};

/// Raw linear reward oracle that counts its queries.
#[derive(Debug, Clone)]
pub struct RawLinearOracle {
    theta: Vec<f64>,
    queries: usize,
}

impl RawLinearOracle {
    pub fn new(theta: Vec<f64>) -> Self {
        Self { theta, queries: 0 }
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn query(&mut self, a: &[f64]) -> Result<f64> {
        crate::error::check_dim(self.theta.len(), a.len())?;
        self.queries += 1;
        Ok(dot(&self.theta, a))
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    fn probe_sum(&mut self, lo: usize, hi: usize) -> Result<f64> {
        let k = (hi - lo) as f64;
        let mut a = vec![0.0; self.theta.len()];
        a[lo..hi].iter_mut().for_each(|x| *x = 1.0 / k.sqrt());
        Ok(self.query(&a)? * k.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparseSearchResult {
    pub support: Vec<usize>,
    pub queries: usize,
}

/// Worst-case probe count `s(⌈log₂ d⌉ + 1) + s`.
pub fn query_bound(d: usize, s: usize) -> usize {
    let log = (usize::BITS - (d.max(1) - 1).leading_zeros()) as usize;
    s * (log + 1) + s
}

pub fn sparse_binary_search(oracle: &mut RawLinearOracle) -> Result<SparseSearchResult> {
    let d = oracle.dim();
    if d == 0 {
        return Err(ViolinError::InvalidParams("dimension must be positive".into()));
    }
    let total = oracle.probe_sum(0, d)?;
    let tol = 1e-12 * total.abs().max(1.0);
    if total < -tol {
        return Err(ViolinError::Cancellation("full-vector probe is negative".into()));
    }
    let mut support = Vec::new();
    let mut stack = vec![(0usize, d, total)];
    while let Some((lo, hi, sum)) = stack.pop() {
        if sum <= tol {
            continue;
        }
        if hi - lo == 1 {
            support.push(lo);
            continue;
        }
        let mid = lo + (hi - lo) / 2;
        let left = oracle.probe_sum(lo, mid)?;
        let right = sum - left;
        if left < -tol || right < -tol {
            return Err(ViolinError::Cancellation(format!(
                "negative half-sum on coordinates {lo}..{hi}"
            )));
        }
        stack.push((mid, hi, right));
        stack.push((lo, mid, left));
    }
    support.sort_unstable();
    Ok(SparseSearchResult {
        support,
        queries: oracle.queries(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_coordinate_in_four_probes() {
        let mut theta = vec![0.0; 8];
        theta[3] = 1.0;
        let r = sparse_binary_search(&mut RawLinearOracle::new(theta)).unwrap();
        assert_eq!(r.support, vec![3]);
        assert!(r.queries <= 4);
    }

    #[test]
    fn zero_vector_has_empty_support() {
        let r = sparse_binary_search(&mut RawLinearOracle::new(vec![0.0; 16])).unwrap();
        assert!(r.support.is_empty());
        assert_eq!(r.queries, 1);
    }

    #[test]
    fn negative_entries_are_refused() {
        let mut theta = vec![0.0; 8];
        theta[0] = 0.2;
        theta[5] = -0.9;
        assert!(matches!(
            sparse_binary_search(&mut RawLinearOracle::new(theta)),
            Err(ViolinError::Cancellation(_))
        ));
    }

    #[test]
    fn bound_formula() {
        assert_eq!(query_bound(64, 2), 2 * 7 + 2);
        assert_eq!(query_bound(8, 1), 5);
    }
}
