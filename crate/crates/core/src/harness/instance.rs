//! Seeded problem instances for experiments.

use super::config::{ExperimentConfig, ExperimentFamily};
use crate::error::Result;
use crate::hard::random_unit;
use crate::learner::{build_sparse_cover, HypothesisSet, DEFAULT_COVER_BUDGET};
use crate::linalg::Matrix;
use crate::model::ModelParams;
use crate::seeding::stream;
use rand::Rng;
use rand_distr::StandardNormal;

/// Default two-layer width.
pub const DEFAULT_HIDDEN: usize = 4;

/// A hypothesis class and the index of the true member.
#[derive(Debug, Clone)]
pub struct Instance {
    pub set: HypothesisSet,
    pub truth_index: usize,
}

impl Instance {
    pub fn truth(&self) -> &ModelParams {
        &self.set.members()[self.truth_index]
    }
}

fn l1_normalized<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let s: f64 = v.iter().map(|x: &f64| x.abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    v.into_iter().map(|x| x / s).collect()
}

/// Two-layer network with rows of `w1` and `w2` on the ℓ1 unit sphere.
pub fn random_two_layer<R: Rng>(d: usize, hidden: usize, rng: &mut R) -> Result<ModelParams> {
    let mut rows = Vec::with_capacity(hidden * d);
    for _ in 0..hidden {
        rows.extend(l1_normalized(d, rng));
    }
    let w1 = Matrix::from_row_major(hidden, d, rows)?;
    ModelParams::two_layer(w1, l1_normalized(hidden, rng))
}

/// The instance for one seed. Members are drawn from `stream(seed, k)`;
/// the truth index from `stream(seed, u64::MAX)`.
pub fn build_instance(cfg: &ExperimentConfig, seed: u64) -> Result<Instance> {
    let d = cfg.dim;
    let set = match cfg.family {
        ExperimentFamily::SparseLinear => build_sparse_cover(
            d,
            cfg.sparsity.unwrap_or(1),
            cfg.resolution.unwrap_or(0.5),
            DEFAULT_COVER_BUDGET,
        )?,
        family => {
            let members = (0..cfg.hypotheses)
                .map(|k| {
                    let mut rng = stream(seed, k as u64);
                    match family {
                        ExperimentFamily::Linear => ModelParams::linear(random_unit(d, &mut rng)),
                        ExperimentFamily::Logistic => ModelParams::logistic(random_unit(d, &mut rng)),
                        _ => random_two_layer(d, cfg.hidden.unwrap_or(DEFAULT_HIDDEN), &mut rng),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            HypothesisSet::explicit(members)?
        }
    };
    let truth_index = stream(seed, u64::MAX).random_range(0..set.len());
    Ok(Instance { set, truth_index })
}
