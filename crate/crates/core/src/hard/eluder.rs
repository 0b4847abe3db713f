//! Sequences of actions each independent of its predecessors, with stored
//! witness pairs, and a verifier that evaluates witnesses by its own rules.

use super::packing::SpherePacking;
use crate::error::{Result, ViolinError};
use serde::{Deserialize, Serialize};

/// A reward function used as half of a witness pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Witness {
    /// `a ↦ ⟨v, a⟩`
    Linear { v: Vec<f64> },
    /// `a ↦ max{⟨θ, a⟩ − 1 + ε, 0}`
    ReluNeedle { theta: Vec<f64>, eps: f64 },
    Zero,
}

impl Witness {
    /// Evaluated independently of the model module so that a bug there
    /// cannot certify its own output.
    pub fn eval(&self, a: &[f64]) -> f64 {
        let inner = |v: &[f64]| v.iter().zip(a).fold(0.0, |acc, (x, y)| acc + x * y);
        match self {
            Witness::Linear { v } => inner(v),
            Witness::ReluNeedle { theta, eps } => {
                let z = inner(theta) - 1.0 + eps;
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Witness::Zero => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderSequence {
    pub actions: Vec<Vec<f64>>,
    pub witnesses: Vec<(Witness, Witness)>,
    /// Required gap at each action.
    pub eps: f64,
}

impl EluderSequence {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// Each action with its witness pair, permuted by `order`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            actions: order.iter().map(|&i| self.actions[i].clone()).collect(),
            witnesses: order.iter().map(|&i| self.witnesses[i].clone()).collect(),
            eps: self.eps,
        }
    }
}

/// Checks that the witness pair at every index agrees exactly on all
/// predecessors and differs by at least `eps` at the action itself.
pub fn verify_eluder(seq: &EluderSequence) -> Result<()> {
    if seq.actions.len() != seq.witnesses.len() {
        return Err(ViolinError::Verification("one witness pair per action required".into()));
    }
    for (i, (f, g)) in seq.witnesses.iter().enumerate() {
        for (j, a) in seq.actions[..i].iter().enumerate() {
            let (x, y) = (f.eval(a), g.eval(a));
            if x != y {
                return Err(ViolinError::Verification(format!(
                    "witness {i} disagrees on predecessor {j}: {x} vs {y}"
                )));
            }
        }
        let gap = (f.eval(&seq.actions[i]) - g.eval(&seq.actions[i])).abs();
        if gap < seq.eps {
            return Err(ViolinError::Verification(format!("witness {i} gap {gap} below {}", seq.eps)));
        }
    }
    Ok(())
}

/// The basis `e_1, …, e_d` with witnesses `(⟨e_i, ·⟩, 0)`.
pub fn eluder_sequence_sparse(d: usize) -> Result<EluderSequence> {
    if d == 0 {
        return Err(ViolinError::InvalidParams("dimension must be positive".into()));
    }
    let basis = |i: usize| {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        e
    };
    let seq = EluderSequence {
        actions: (0..d).map(basis).collect(),
        witnesses: (0..d).map(|i| (Witness::Linear { v: basis(i) }, Witness::Zero)).collect(),
        eps: 1.0,
    };
    verify_eluder(&seq)?;
    Ok(seq)
}

/// Packing points with witnesses `(needle at θ_i, 0)`: the needle is silent
/// on every other packing point and returns `eps` at its own. Fails when
/// `eps` is too wide for the packing's separation.
pub fn eluder_sequence_relu(packing: &SpherePacking, eps: f64) -> Result<EluderSequence> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ViolinError::InvalidParams(format!("needle width {eps} outside (0, 1)")));
    }
    let seq = EluderSequence {
        actions: packing.points().to_vec(),
        witnesses: packing
            .points()
            .iter()
            .map(|p| (Witness::ReluNeedle { theta: p.clone(), eps }, Witness::Zero))
            .collect(),
        // ⟨θ, θ⟩ − 1 + ε can round just below ε
        eps: eps * (1.0 - 1e-12),
    };
    verify_eluder(&seq)?;
    Ok(seq)
}
