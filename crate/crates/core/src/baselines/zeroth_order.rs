//! Two-point zeroth-order gradient ascent.
//!
//! The gradient estimate is `g = (d/α)(η(a + αu) − η(a)) u` with `u`
//! uniform on the unit sphere, followed by a projected step.

use crate::error::{Result, ViolinError};
use crate::linalg::{axpy, norm, project_ball};
use crate::model::ModelParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StepSchedule {
    /// `c/d` every step. Rewards are deterministic, so the estimator noise
    /// shrinks with the gradient and no decay is needed.
    Constant { c: f64 },
    /// `c/(d√t)`
    InverseSqrt { c: f64 },
}

impl StepSchedule {
    fn at(&self, t: usize, d: usize) -> f64 {
        match *self {
            StepSchedule::Constant { c } => c / d as f64,
            StepSchedule::InverseSqrt { c } => c / (d as f64 * (t as f64).sqrt()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZerothOrderConfig {
    pub horizon: usize,
    pub smoothing: f64,
    pub schedule: StepSchedule,
    pub seed: u64,
}

impl ZerothOrderConfig {
    pub fn new(horizon: usize, seed: u64) -> Self {
        Self {
            horizon,
            smoothing: 1e-3,
            schedule: StepSchedule::Constant { c: 1.0 },
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZerothOrderLedger {
    pub actions: Vec<Vec<f64>>,
    /// Reward at each iterate (the base point of the two-point query).
    pub rewards: Vec<f64>,
    /// Cumulative reward queries after each step.
    pub queries: Vec<u64>,
}

impl ZerothOrderLedger {
    pub fn final_action(&self) -> &[f64] {
        self.actions.last().map_or(&[], Vec::as_slice)
    }
}

pub fn zeroth_order_ascent(env: &ModelParams, cfg: &ZerothOrderConfig) -> Result<ZerothOrderLedger> {
    if cfg.horizon == 0 {
        return Err(ViolinError::InvalidParams("horizon must be at least 1".into()));
    }
    let d = env.dim();
    let bound = env.family().action_bound();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut a = vec![0.0; d];
    let mut ledger = ZerothOrderLedger {
        actions: Vec::with_capacity(cfg.horizon),
        rewards: Vec::with_capacity(cfg.horizon),
        queries: Vec::with_capacity(cfg.horizon),
    };
    let mut queries = 0u64;
    for t in 1..=cfg.horizon {
        let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&g).max(f64::MIN_POSITIVE);
        let u: Vec<f64> = g.into_iter().map(|x| x / n).collect();
        let mut probe = a.clone();
        axpy(&mut probe, cfg.smoothing, &u);
        let f0 = env.eta(&a)?;
        let f1 = env.eta(&probe)?;
        queries += 2;
        let coef = d as f64 * (f1 - f0) / cfg.smoothing;
        axpy(&mut a, cfg.schedule.at(t, d) * coef, &u);
        project_ball(&mut a, bound);
        ledger.actions.push(a.clone());
        ledger.rewards.push(f0);
        ledger.queries.push(queries);
    }
    Ok(ledger)
}
