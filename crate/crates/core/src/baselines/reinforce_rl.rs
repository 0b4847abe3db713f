//! Model-free REINFORCE policy ascent on real trajectories only.

use crate::error::{Result, ViolinError};
use crate::rl::env::{rollout, DynamicsParams, MdpSpec, PolicyParams, Trajectory};
use crate::rl::estimators::reinforce_grad_from;
use crate::rl::violin::{certify, CertifyConfig, RlLedger, RlStepRecord};
use crate::seeding::derive_seed;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReinforceConfig {
    /// Real trajectories per gradient step.
    pub batch: usize,
    pub step: f64,
    /// Stop once this many real trajectories have been used.
    pub max_trajectories: u64,
    pub seed: u64,
    pub certify: Option<CertifyConfig>,
    /// Stop at the first certified iterate.
    pub stop_when_certified: bool,
}

impl ReinforceConfig {
    pub fn new(batch: usize, step: f64, max_trajectories: u64, seed: u64) -> Self {
        Self {
            batch,
            step,
            max_trajectories,
            seed,
            certify: None,
            stop_when_certified: false,
        }
    }
}

/// Runs gradient steps from `ψ = 0` until the trajectory budget is spent.
/// Every iterate (including the start) gets a ledger row; its
/// `trajectories_before` counts the real trajectories spent to produce it.
pub fn reinforce_baseline_rl(spec: &MdpSpec, truth: &DynamicsParams, cfg: &ReinforceConfig) -> Result<RlLedger> {
    if cfg.batch == 0 {
        return Err(ViolinError::InvalidParams("batch must be positive".into()));
    }
    let mut psi = PolicyParams::zeros(spec.d);
    let mut used = 0u64;
    let mut steps = Vec::new();
    let mut iter = 0usize;
    loop {
        let iter_seed = derive_seed(cfg.seed, iter as u64);
        let certificate = match &cfg.certify {
            Some(c) if iter.is_multiple_of(c.every.max(1)) => Some(certify(truth, &psi, spec, c, derive_seed(iter_seed, 1))?),
            _ => None,
        };
        let done_by_cert = cfg.stop_when_certified
            && matches!((certificate, &cfg.certify), (Some(v), Some(c)) if v <= c.threshold);
        let before = used;
        let can_step = used + cfg.batch as u64 <= cfg.max_trajectories && !done_by_cert;
        let (real_return, next) = if can_step {
            let batch: Vec<Trajectory> = (0..cfg.batch)
                .map(|i| rollout(truth, &psi, spec, derive_seed(iter_seed, 2 + i as u64)))
                .collect();
            used += cfg.batch as u64;
            let g = reinforce_grad_from(&psi, spec, &batch)?;
            let mean_return = batch.iter().map(Trajectory::total_reward).sum::<f64>() / batch.len() as f64;
            let mut m = psi.matrix().clone();
            m.add_scaled(cfg.step, &g.value);
            (mean_return, Some(PolicyParams::projected(m)?))
        } else {
            (f64::NAN, None)
        };
        iter += 1;
        steps.push(RlStepRecord {
            round: iter,
            psi: psi.matrix().clone(),
            real_return,
            expected_loss: 0.0,
            trajectories_before: before,
            trajectories_after: used,
            certificate,
        });
        match next {
            Some(p) => psi = p,
            None => break,
        }
    }
    Ok(RlLedger {
        seed: cfg.seed,
        steps,
        cumulative_losses: Vec::new(),
    })
}
