//! Model-based policy learning on a small deterministic-dynamics MDP.

pub mod env;
pub mod estimators;
pub mod telescoping;
pub mod violin;

pub use env::{
    dynamics_loss, mc_return, replay, rollout, DynamicsParams, InitialState, McEstimate, MdpSpec, PolicyParams,
    RLConstants, Reward, Trajectory,
};
pub use estimators::{reinforce_grad, reinforce_hess, score_grad, score_hess_form, MatrixEstimate};
pub use telescoping::telescoping_check;
pub use violin::{certify, run_violin_rl, CertifyConfig, PolicyAscentConfig, RlLedger, RlStepRecord, RlViolinConfig};

use crate::seeding::stream;

/// A finite class of `count` independently drawn dynamics networks.
pub fn random_dynamics_class(d: usize, hidden: usize, count: usize, scale: f64, seed: u64) -> Vec<DynamicsParams> {
    (0..count)
        .map(|i| DynamicsParams::random(d, hidden, scale, &mut stream(seed, i as u64)))
        .collect()
}
