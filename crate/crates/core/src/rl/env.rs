//! The small MDP: state-and-action dimension `d`, dynamics
//! `T_θ(s, a) = N_θ(s + a)`, Gaussian linear policy `a = ψs + σu`.

use crate::error::{check_dim, Result, ViolinError};
use crate::linalg::{dist, dot, norm, project_op_norm, Matrix};
use crate::seeding::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Rollout batches at least this large are simulated in parallel.
pub(crate) const PARALLEL_ROLLOUTS: usize = 512;

/// Per-step reward `r(s, a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Reward {
    Constant { value: f64 },
    /// `⟨w, a⟩`
    LinearAction { w: Vec<f64> },
    /// `⟨w, s⟩`
    LinearState { w: Vec<f64> },
    /// `1 − ‖s − goal‖²/4 − action_cost·‖a‖²`
    Goal { goal: Vec<f64>, action_cost: f64 },
}

impl Reward {
    pub fn eval(&self, s: &[f64], a: &[f64]) -> f64 {
        match self {
            Reward::Constant { value } => *value,
            Reward::LinearAction { w } => dot(w, a),
            Reward::LinearState { w } => dot(w, s),
            Reward::Goal { goal, action_cost } => {
                let ds = dist(s, goal);
                1.0 - 0.25 * ds * ds - action_cost * dot(a, a)
            }
        }
    }
}

/// Distribution of the initial state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InitialState {
    Point { state: Vec<f64> },
    /// Uniform in the ball of the given radius (at most 1).
    Ball { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpSpec {
    pub d: usize,
    pub horizon: usize,
    pub initial: InitialState,
    pub reward: Reward,
    pub sigma: f64,
}

impl MdpSpec {
    pub fn new(d: usize, horizon: usize, initial: InitialState, reward: Reward, sigma: f64) -> Result<Self> {
        if d == 0 || horizon == 0 {
            return Err(ViolinError::InvalidParams("dimension and horizon must be positive".into()));
        }
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(ViolinError::InvalidParams("sigma must lie in (0, 1)".into()));
        }
        match &initial {
            InitialState::Point { state } => {
                check_dim(d, state.len())?;
                if norm(state) > 1.0 + 1e-12 {
                    return Err(ViolinError::InvalidParams("initial state must lie in the unit ball".into()));
                }
            }
            InitialState::Ball { radius } => {
                if !(0.0..=1.0).contains(radius) {
                    return Err(ViolinError::InvalidParams("initial ball radius must lie in [0, 1]".into()));
                }
            }
        }
        match &reward {
            Reward::LinearAction { w } | Reward::LinearState { w } => check_dim(d, w.len())?,
            Reward::Goal { goal, .. } => check_dim(d, goal.len())?,
            Reward::Constant { .. } => {}
        }
        Ok(Self {
            d,
            horizon,
            initial,
            reward,
            sigma,
        })
    }

    pub fn sample_initial<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        match &self.initial {
            InitialState::Point { state } => state.clone(),
            InitialState::Ball { radius } => {
                let g: Vec<f64> = (0..self.d).map(|_| rng.sample(StandardNormal)).collect();
                let n = norm(&g).max(f64::MIN_POSITIVE);
                let r = radius * rng.random::<f64>().powf(1.0 / self.d as f64);
                g.into_iter().map(|x| x * r / n).collect()
            }
        }
    }
}

/// Documented Lipschitz and score-moment constants for the environment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RLConstants {
    pub l0: f64,
    pub l1: f64,
    pub l2: f64,
    pub chi_g: f64,
    pub chi_f: f64,
    pub chi_h: f64,
}

impl RLConstants {
    /// Score-moment bounds for the Gaussian policy: `χ_g = 1/σ²`, and the
    /// Hessian of the log-density has operator norm `‖s‖²/σ² ≤ 1/σ²`.
    /// The value constants are stored as `H`-scaled reward bounds.
    pub fn for_spec(spec: &MdpSpec, reward_bound: f64) -> Self {
        let s2 = spec.sigma * spec.sigma;
        let h = spec.horizon as f64;
        Self {
            l0: h * reward_bound,
            l1: h * h * reward_bound / spec.sigma,
            l2: h * h * h * reward_bound / s2,
            chi_g: 1.0 / s2,
            chi_f: 3.0 / (s2 * s2),
            chi_h: 1.0 / s2,
        }
    }
}

/// One hidden tanh layer followed by radial clipping into the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsParams {
    pub w_in: Matrix,
    pub b_in: Vec<f64>,
    pub w_out: Matrix,
}

impl DynamicsParams {
    pub fn new(w_in: Matrix, b_in: Vec<f64>, w_out: Matrix) -> Result<Self> {
        check_dim(w_in.rows(), b_in.len())?;
        check_dim(w_in.rows(), w_out.cols())?;
        check_dim(w_in.cols(), w_out.rows())?;
        Ok(Self { w_in, b_in, w_out })
    }

    /// Network with `hidden` units and i.i.d. `N(0, scale²/fan_in)` weights.
    pub fn random<R: Rng>(d: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        let mut draw = |rows: usize, cols: usize, fan: usize| {
            let sd = scale / (fan as f64).sqrt();
            let data = (0..rows * cols)
                .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                .collect();
            Matrix::from_row_major(rows, cols, data).expect("sizes match")
        };
        let w_in = draw(hidden, d, d);
        let w_out = draw(d, hidden, hidden);
        let b_in = (0..hidden).map(|_| 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
        Self { w_in, b_in, w_out }
    }

    pub fn dim(&self) -> usize {
        self.w_in.cols()
    }

    /// `N_θ(x)`, always inside the closed unit ball.
    pub fn network(&self, x: &[f64]) -> Vec<f64> {
        let hidden: Vec<f64> = self
            .w_in
            .matvec(x)
            .iter()
            .zip(&self.b_in)
            .map(|(z, b)| (z + b).tanh())
            .collect();
        let mut out = self.w_out.matvec(&hidden);
        let n = norm(&out);
        if n > 1.0 {
            out.iter_mut().for_each(|v| *v /= n);
        }
        out
    }

    /// `T_θ(s, a) = N_θ(s + a)`
    pub fn step(&self, s: &[f64], a: &[f64]) -> Vec<f64> {
        let x: Vec<f64> = s.iter().zip(a).map(|(x, y)| x + y).collect();
        self.network(&x)
    }
}

/// Linear policy matrix `ψ` with `‖ψ‖_op ≤ 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    psi: Matrix,
}

impl PolicyParams {
    pub fn zeros(d: usize) -> Self {
        Self {
            psi: Matrix::zeros(d, d),
        }
    }

    /// Projects onto the operator-norm unit ball.
    pub fn projected(psi: Matrix) -> Result<Self> {
        check_dim(psi.rows(), psi.cols())?;
        Ok(Self {
            psi: project_op_norm(&psi, 1.0)?,
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.psi
    }

    pub fn dim(&self) -> usize {
        self.psi.rows()
    }

    pub fn mean_action(&self, s: &[f64]) -> Vec<f64> {
        self.psi.matvec(s)
    }
}

/// A rollout with its noise so it can be replayed.
///
/// `states` holds `s_1 … s_{H+1}`; the last entry is the state reached after
/// the final action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub noise: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.rewards.iter().sum()
    }

    pub fn horizon(&self) -> usize {
        self.actions.len()
    }
}

/// Rollout with given initial state and per-step noise `u_h`, where
/// `a_h = ψ s_h + σ u_h`.
pub fn replay(
    theta: &DynamicsParams,
    psi: &PolicyParams,
    spec: &MdpSpec,
    s1: Vec<f64>,
    noise: Vec<Vec<f64>>,
    seed: u64,
) -> Trajectory {
    let mut states = Vec::with_capacity(noise.len() + 1);
    let mut actions = Vec::with_capacity(noise.len());
    let mut rewards = Vec::with_capacity(noise.len());
    let mut s = s1;
    for u in &noise {
        let mut a = psi.mean_action(&s);
        for (ai, ui) in a.iter_mut().zip(u) {
            *ai += spec.sigma * ui;
        }
        rewards.push(spec.reward.eval(&s, &a));
        let next = theta.step(&s, &a);
        states.push(std::mem::replace(&mut s, next));
        actions.push(a);
    }
    states.push(s);
    Trajectory {
        states,
        actions,
        rewards,
        noise,
        seed,
    }
}

/// Seeded rollout: the initial state and all noise come from `seed`.
pub fn rollout(theta: &DynamicsParams, psi: &PolicyParams, spec: &MdpSpec, seed: u64) -> Trajectory {
    let mut rng = stream(seed, 0);
    let s1 = spec.sample_initial(&mut rng);
    let noise = (0..spec.horizon)
        .map(|_| (0..spec.d).map(|_| rng.sample(StandardNormal)).collect())
        .collect();
    replay(theta, psi, spec, s1, noise, seed)
}

/// Seed of the `i`-th rollout in a batch drawn from `seed`.
pub fn rollout_seed(seed: u64, i: usize) -> u64 {
    crate::seeding::derive_seed(seed, i as u64 + 1)
}

/// Applies `f` to `n` rollouts with derived seeds, in index order.
pub(crate) fn map_rollouts<T: Send>(
    theta: &DynamicsParams,
    psi: &PolicyParams,
    spec: &MdpSpec,
    n: usize,
    seed: u64,
    f: impl Fn(&Trajectory) -> T + Sync,
) -> Vec<T> {
    let one = |i: usize| f(&rollout(theta, psi, spec, rollout_seed(seed, i)));
    if n >= PARALLEL_ROLLOUTS {
        (0..n).into_par_iter().map(one).collect()
    } else {
        (0..n).map(one).collect()
    }
}

/// Sample mean and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
}

pub fn mean_and_se(xs: &[f64]) -> McEstimate {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let se = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    McEstimate { mean, se }
}

/// Monte Carlo estimate of the expected return `η(θ, ψ)`.
pub fn mc_return(theta: &DynamicsParams, psi: &PolicyParams, spec: &MdpSpec, n: usize, seed: u64) -> Result<McEstimate> {
    if n == 0 {
        return Err(ViolinError::InvalidParams("need at least one rollout".into()));
    }
    let returns = map_rollouts(theta, psi, spec, n, seed, Trajectory::total_reward);
    Ok(mean_and_se(&returns))
}

/// `Σ_τ Σ_h ‖T_θ(s_h, a_h) − s_{h+1}‖²` over the given trajectories, whose
/// recorded next states are the labels.
pub fn dynamics_loss(theta: &DynamicsParams, trajectories: &[&Trajectory]) -> f64 {
    let mut total = 0.0;
    for tau in trajectories {
        for h in 0..tau.horizon() {
            let pred = theta.step(&tau.states[h], &tau.actions[h]);
            let e = dist(&pred, &tau.states[h + 1]);
            total += e * e;
        }
    }
    total
}
