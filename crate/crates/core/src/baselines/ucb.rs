//! Tightest upper confidence bound over a finite hypothesis class with
//! deterministic rewards, restricted to a finite candidate action set.

use crate::error::{Result, ViolinError};
use crate::learner::HypothesisSet;
use crate::linalg::{axpy, norm};
use crate::model::{ModelParams, TRAP_SLOPE};
use serde::{Deserialize, Serialize};

/// Agreement tolerance for consistency with observed rewards.
pub const CONSISTENCY_TOL: f64 = 1e-12;

/// Indices of hypotheses that agree with every observed reward.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencySet {
    indices: Vec<usize>,
}

impl ConsistencySet {
    pub fn full(n: usize) -> Self {
        Self {
            indices: (0..n).collect(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    /// Drops hypotheses whose reward at `a` differs from `observed`;
    /// returns the dropped indices.
    pub fn update(&mut self, set: &HypothesisSet, a: &[f64], observed: f64) -> Result<Vec<usize>> {
        let mut kept = Vec::with_capacity(self.indices.len());
        let mut dropped = Vec::new();
        for &i in &self.indices {
            if (set.members()[i].eta(a)? - observed).abs() <= CONSISTENCY_TOL {
                kept.push(i);
            } else {
                dropped.push(i);
            }
        }
        if kept.is_empty() {
            return Err(ViolinError::EmptyConsistencySet);
        }
        self.indices = kept;
        Ok(dropped)
    }

    /// `C(a) = max_{θ ∈ Θ_t} η(θ, a)`
    pub fn upper_bound(&self, set: &HypothesisSet, a: &[f64]) -> Result<f64> {
        if self.indices.is_empty() {
            return Err(ViolinError::EmptyConsistencySet);
        }
        let mut best = f64::NEG_INFINITY;
        for &i in &self.indices {
            best = best.max(set.members()[i].eta(a)?);
        }
        Ok(best)
    }
}

/// Index of the candidate with the largest upper bound, lowest on ties.
pub fn ucb_tightest_step(cs: &ConsistencySet, set: &HypothesisSet, candidates: &[Vec<f64>]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(ViolinError::InvalidParams("candidate set is empty".into()));
    }
    let mut best = (0, f64::NEG_INFINITY);
    for (k, a) in candidates.iter().enumerate() {
        let c = cs.upper_bound(set, a)?;
        if c > best.1 {
            best = (k, c);
        }
    }
    Ok(best.0)
}

/// Maximizer over the unit ball of a trap reward. The reward is linear on
/// each side of the bump threshold, so the optimum is either the `θ1`
/// direction or the normalized active-region gradient.
pub fn trap_optimum(m: &ModelParams) -> Result<Vec<f64>> {
    let ModelParams::UcbTrap { theta1, theta2, alpha } = m else {
        return Err(ViolinError::Unsupported("trap optimum of a non-trap model".into()));
    };
    let unit = |v: Vec<f64>| {
        let n = norm(&v);
        if n > 0.0 {
            v.into_iter().map(|x| x / n).collect()
        } else {
            v
        }
    };
    let flat = unit(theta1.clone());
    let mut w: Vec<f64> = theta1.iter().map(|x| TRAP_SLOPE * x).collect();
    axpy(&mut w, *alpha, theta2);
    let bump = unit(w);
    Ok(if m.eta(&bump)? > m.eta(&flat)? { bump } else { flat })
}

/// Finite candidate set for a trap class: every member's optimum, every
/// member's bump centre, and every distinct `θ1` direction.
pub fn trap_candidates(set: &HypothesisSet) -> Result<Vec<Vec<f64>>> {
    let mut out: Vec<Vec<f64>> = Vec::new();
    let push = |v: Vec<f64>, out: &mut Vec<Vec<f64>>| {
        if !out.contains(&v) {
            out.push(v);
        }
    };
    for m in set.members() {
        push(trap_optimum(m)?, &mut out);
        if let ModelParams::UcbTrap { theta2, .. } = m {
            push(theta2.clone(), &mut out);
        }
        push(m.anchor(), &mut out);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbLedger {
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    /// Upper bound of the chosen action at each step.
    pub bounds: Vec<f64>,
    /// Hypotheses eliminated at each step.
    pub eliminated: Vec<Vec<usize>>,
    /// Size of the consistency set after each step.
    pub surviving: Vec<usize>,
}

/// Runs tightest-UCB for `horizon` steps against `env`.
pub fn run_ucb_tightest(env: &ModelParams, set: &HypothesisSet, candidates: &[Vec<f64>], horizon: usize) -> Result<UcbLedger> {
    let mut cs = ConsistencySet::full(set.len());
    let mut ledger = UcbLedger {
        actions: Vec::with_capacity(horizon),
        rewards: Vec::with_capacity(horizon),
        bounds: Vec::with_capacity(horizon),
        eliminated: Vec::with_capacity(horizon),
        surviving: Vec::with_capacity(horizon),
    };
    for _ in 0..horizon {
        let k = ucb_tightest_step(&cs, set, candidates)?;
        let a = &candidates[k];
        ledger.bounds.push(cs.upper_bound(set, a)?);
        let r = env.eta(a)?;
        let dropped = cs.update(set, a, r)?;
        ledger.actions.push(a.clone());
        ledger.rewards.push(r);
        ledger.eliminated.push(dropped);
        ledger.surviving.push(cs.len());
    }
    Ok(ledger)
}
