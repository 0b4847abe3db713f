//! Policy learning with a learned dynamics model: each round the learner
//! fits a posterior over a finite dynamics class from real trajectories,
//! the policy is improved by REINFORCE ascent inside the posterior-mixture
//! model, and exactly two real trajectories are collected.

use super::env::{dynamics_loss, mc_return, rollout, DynamicsParams, MdpSpec, PolicyParams};
use super::estimators::reinforce_grad;
use crate::error::{Result, ViolinError};
use crate::learner::{hedge_rate, LearnerKind, OnlineLearner, PosteriorWeights};
use crate::linalg::Matrix;
use crate::seeding::derive_seed;
use serde::{Deserialize, Serialize};

/// Model-based ascent settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyAscentConfig {
    pub steps: usize,
    /// Step size in round `t` is `step0/√t`.
    pub step0: f64,
    /// Model rollouts per hypothesis per gradient.
    pub rollouts: usize,
    /// Hypotheses with smaller posterior weight are skipped.
    pub min_weight: f64,
}

impl Default for PolicyAscentConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            step0: 0.1,
            rollouts: 256,
            min_weight: 1e-6,
        }
    }
}

/// Privileged high-sample gradient check against the true dynamics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CertifyConfig {
    pub rollouts: usize,
    /// Certify every `every`-th iterate (the first iterate is always
    /// certified).
    pub every: usize,
    pub threshold: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            rollouts: 20_000,
            every: 1,
            threshold: 0.3,
        }
    }
}

/// `‖ĝ‖_F + 3·SE` of the gradient of the true return at `psi`.
pub fn certify(truth: &DynamicsParams, psi: &PolicyParams, spec: &MdpSpec, cfg: &CertifyConfig, seed: u64) -> Result<f64> {
    Ok(reinforce_grad(truth, psi, spec, cfg.rollouts, seed)?.certificate())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlViolinConfig {
    pub rounds: usize,
    pub learner: LearnerKind,
    pub ascent: PolicyAscentConfig,
    pub lr: Option<f64>,
    pub seed: u64,
    pub certify: Option<CertifyConfig>,
    /// End the run at the first certified round.
    pub stop_when_certified: bool,
}

impl RlViolinConfig {
    pub fn new(rounds: usize, learner: LearnerKind, seed: u64) -> Self {
        Self {
            rounds,
            learner,
            ascent: PolicyAscentConfig::default(),
            lr: None,
            seed,
            certify: None,
            stop_when_certified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlStepRecord {
    pub round: usize,
    pub psi: Matrix,
    /// Return of the real trajectory collected with this round's policy.
    pub real_return: f64,
    /// `E_{p_t}` of this round's dynamics loss.
    pub expected_loss: f64,
    /// Real trajectories consumed before this policy was produced.
    pub trajectories_before: u64,
    /// Real trajectories consumed after this round.
    pub trajectories_after: u64,
    pub certificate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RlLedger {
    pub seed: u64,
    pub steps: Vec<RlStepRecord>,
    pub cumulative_losses: Vec<f64>,
}

impl RlLedger {
    pub fn real_trajectories(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.trajectories_after)
    }

    /// Smallest certificate seen.
    pub fn best_certificate(&self) -> Option<f64> {
        self.steps
            .iter()
            .filter_map(|s| s.certificate)
            .fold(None, |m, c| Some(m.map_or(c, |x: f64| x.min(c))))
    }

    /// Real trajectories consumed before the first policy certified at or
    /// below `threshold`.
    pub fn trajectories_to_certificate(&self, threshold: f64) -> Option<u64> {
        self.steps
            .iter()
            .find(|s| s.certificate.is_some_and(|c| c <= threshold))
            .map(|s| s.trajectories_before)
    }
}

/// REINFORCE ascent on `E_{θ~p} η(θ, ψ)` from `start`, projected to
/// `‖ψ‖_op ≤ 1`. Returns `start` unchanged when a common-random-number
/// comparison finds the end point worse.
pub fn virtual_policy_ascent(
    p: &PosteriorWeights,
    models: &[DynamicsParams],
    start: &PolicyParams,
    spec: &MdpSpec,
    cfg: &PolicyAscentConfig,
    round: usize,
    seed: u64,
) -> Result<PolicyParams> {
    let mut active: Vec<(&DynamicsParams, f64)> = models
        .iter()
        .zip(p.as_slice())
        .filter(|(_, w)| **w >= cfg.min_weight)
        .map(|(m, w)| (m, *w))
        .collect();
    if active.is_empty() {
        return Err(ViolinError::NumericalUnderflow);
    }
    let z: f64 = active.iter().map(|(_, w)| w).sum();
    active.iter_mut().for_each(|(_, w)| *w /= z);

    let step = cfg.step0 / (round.max(1) as f64).sqrt();
    let d = spec.d;
    let mut psi = start.clone();
    for k in 0..cfg.steps {
        let mut g = Matrix::zeros(d, d);
        for (i, (m, w)) in active.iter().enumerate() {
            let s = derive_seed(seed, (k * models.len() + i) as u64);
            g.add_scaled(*w, &reinforce_grad(m, &psi, spec, cfg.rollouts, s)?.value);
        }
        let mut next = psi.matrix().clone();
        next.add_scaled(step, &g);
        psi = PolicyParams::projected(next)?;
    }

    let eval_seed = derive_seed(seed, u64::MAX);
    let value = |x: &PolicyParams| -> Result<f64> {
        let mut v = 0.0;
        for (i, (m, w)) in active.iter().enumerate() {
            v += w * mc_return(m, x, spec, 4 * cfg.rollouts, derive_seed(eval_seed, i as u64))?.mean;
        }
        Ok(v)
    };
    if value(&psi)? < value(start)? {
        return Ok(start.clone());
    }
    Ok(psi)
}

/// Full run against the true dynamics `truth`; `models` must contain it.
pub fn run_violin_rl(spec: &MdpSpec, truth: &DynamicsParams, models: &[DynamicsParams], cfg: &RlViolinConfig) -> Result<RlLedger> {
    if cfg.rounds == 0 {
        return Err(ViolinError::InvalidParams("need at least one round".into()));
    }
    if models.is_empty() {
        return Err(ViolinError::InvalidParams("dynamics class is empty".into()));
    }
    let v = 8.0 * spec.horizon as f64;
    let lr = cfg.lr.unwrap_or_else(|| hedge_rate(models.len(), cfg.rounds, v));
    let mut learner = OnlineLearner::new(cfg.learner, models.len(), lr);
    let mut prev = PolicyParams::zeros(spec.d);
    let mut used = 0u64;
    let mut steps = Vec::with_capacity(cfg.rounds);
    for round in 1..=cfg.rounds {
        let round_seed = derive_seed(cfg.seed, round as u64);
        let p = learner.posterior()?;
        let psi = virtual_policy_ascent(&p, models, &prev, spec, &cfg.ascent, round, derive_seed(round_seed, 0))?;
        let before = used;
        let tau = rollout(truth, &psi, spec, derive_seed(round_seed, 1));
        let tau_prev = rollout(truth, &prev, spec, derive_seed(round_seed, 2));
        used += 2;
        let losses: Vec<f64> = models.iter().map(|m| dynamics_loss(m, &[&tau, &tau_prev])).collect();
        let expected_loss = p.expect(&losses);
        learner.observe(&losses)?;
        let certificate = match &cfg.certify {
            Some(c) if round == 1 || round % c.every.max(1) == 0 => {
                Some(certify(truth, &psi, spec, c, derive_seed(round_seed, 3))?)
            }
            _ => None,
        };
        steps.push(RlStepRecord {
            round,
            psi: psi.matrix().clone(),
            real_return: tau.total_reward(),
            expected_loss,
            trajectories_before: before,
            trajectories_after: used,
            certificate,
        });
        prev = psi;
        let certified = matches!((certificate, &cfg.certify), (Some(v), Some(c)) if v <= c.threshold);
        if cfg.stop_when_certified && certified {
            break;
        }
    }
    Ok(RlLedger {
        seed: cfg.seed,
        steps,
        cumulative_losses: learner.cumulative().to_vec(),
    })
}
