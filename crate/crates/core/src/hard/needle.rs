//! ReLU needles on a packing and random search against them.

use super::packing::{random_unit, SpherePacking};
use crate::error::{Result, ViolinError};
use crate::model::ModelParams;
use crate::seeding::stream;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Largest needle width for which the regions `⟨a, θ_i⟩ > 1 − ε` of a
/// packing with this separation are disjoint inside the unit ball:
/// `1 − √(1 − sep²/4)`.
pub fn needle_width_limit(separation: f64) -> f64 {
    1.0 - (1.0 - separation * separation / 4.0).max(0.0).sqrt()
}

/// One `ReluNeedle` per packing point. Rejects widths above
/// [`needle_width_limit`], where two needles could fire on one action.
pub fn relu_needle_family(packing: &SpherePacking, eps: f64) -> Result<Vec<ModelParams>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(ViolinError::InvalidParams(format!("needle width {eps} outside (0, 1)")));
    }
    let limit = needle_width_limit(packing.separation());
    if eps > limit {
        return Err(ViolinError::InvalidParams(format!(
            "needle width {eps} exceeds {limit} for separation {}",
            packing.separation()
        )));
    }
    packing
        .points()
        .iter()
        .map(|p| ModelParams::relu_needle(p.clone(), eps))
        .collect()
}

/// How a random searcher draws its probes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeDistribution {
    /// Uniform over the packing points, with replacement.
    PackingPoints,
    /// Uniform on the unit sphere.
    Sphere,
}

/// Fraction of `trials` in which `budget` random probes find a nonzero
/// reward. Each trial draws the true needle uniformly from `family`.
pub fn random_probe_success(
    family: &[ModelParams],
    packing: &SpherePacking,
    budget: usize,
    trials: usize,
    probes: ProbeDistribution,
    seed: u64,
) -> Result<f64> {
    if family.is_empty() || trials == 0 {
        return Err(ViolinError::InvalidParams("need a nonempty family and at least one trial".into()));
    }
    let mut hits = 0usize;
    for trial in 0..trials {
        let mut rng = stream(seed, trial as u64);
        let truth = &family[rng.random_range(0..family.len())];
        for _ in 0..budget {
            let a = match probes {
                ProbeDistribution::PackingPoints => packing.points()[rng.random_range(0..packing.len())].clone(),
                ProbeDistribution::Sphere => random_unit(packing.dim(), &mut rng),
            };
            if truth.eta(&a)? > 0.0 {
                hits += 1;
                break;
            }
        }
    }
    Ok(hits as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hard::packing::build_packing;

    #[test]
    fn width_limit_for_half_separation() {
        assert!((needle_width_limit(0.5) - (1.0 - 0.9375_f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn oversized_width_rejected() {
        let p = build_packing(3, 0.5, 0, 100).unwrap();
        assert!(relu_needle_family(&p, 0.2).is_err());
        assert!(relu_needle_family(&p, 0.03).is_ok());
    }
}
