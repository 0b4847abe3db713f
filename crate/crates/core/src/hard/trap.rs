//! The optimism trap: a class of `UcbTrap` rewards sharing a small linear
//! slope `θ1`, each hiding a bump of height `1/32` at a packing point in the
//! half-space `⟨p, θ1⟩ ≤ 0`. The truth has no bump, so its optimum is the
//! `θ1` direction with reward `1/64`, while every bump looks better to an
//! optimistic learner until it is probed.

use super::needle::needle_width_limit;
use super::packing::{build_packing_capped, random_unit, SpherePacking};
use crate::error::{Result, ViolinError};
use crate::learner::HypothesisSet;
use crate::model::{ModelParams, TRAP_THRESHOLD};
use crate::seeding::stream;
use serde::{Deserialize, Serialize};

/// Separation of the bump centres; with it the bump caps are disjoint.
pub const TRAP_SEPARATION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcbTrapInstance {
    pub theta1: Vec<f64>,
    pub packing: SpherePacking,
    /// Index 0 is the bump-free truth; index `i ≥ 1` has its bump at
    /// packing point `i − 1`.
    pub set: HypothesisSet,
}

impl UcbTrapInstance {
    pub fn truth(&self) -> &ModelParams {
        &self.set.members()[0]
    }

    /// Reward of the truth's optimum, `1/64`.
    pub fn optimal_reward(&self) -> Result<f64> {
        self.truth().eta(&self.truth().anchor())
    }
}

pub fn build_ucb_trap(d: usize, members: usize, seed: u64) -> Result<UcbTrapInstance> {
    if d < 2 {
        return Err(ViolinError::InvalidParams("trap needs d ≥ 2".into()));
    }
    debug_assert!(needle_width_limit(TRAP_SEPARATION) >= 1.0 - TRAP_THRESHOLD);
    let theta1 = random_unit(d, &mut stream(seed, 0));
    let raw = build_packing_capped(d, TRAP_SEPARATION, crate::seeding::derive_seed(seed, 1), 100_000, 4 * members + 8)?;
    let packing = raw
        .filtered(|p| crate::linalg::dot(p, &theta1) <= 0.0)
        .truncated(members);
    if packing.len() < members {
        return Err(ViolinError::InvalidParams(format!(
            "only {} bump centres found in d = {d}, wanted {members}",
            packing.len()
        )));
    }
    let mut models = vec![ModelParams::ucb_trap(theta1.clone(), theta1.clone(), 0.0)?];
    for p in packing.points() {
        models.push(ModelParams::ucb_trap(theta1.clone(), p.clone(), 1.0)?);
    }
    Ok(UcbTrapInstance {
        theta1,
        packing,
        set: HypothesisSet::explicit(models)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_centres_sit_in_the_back_half() {
        let inst = build_ucb_trap(8, 64, 5).unwrap();
        assert_eq!(inst.set.len(), 65);
        assert!(inst.packing.points().iter().all(|p| crate::linalg::dot(p, &inst.theta1) <= 0.0));
        assert!((inst.optimal_reward().unwrap() - 1.0 / 64.0).abs() < 1e-15);
    }
}
