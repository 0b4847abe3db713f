//! The bandit loop: supervision through finite differences, virtual ascent
//! on the posterior-mixture reward, and per-step error diagnostics.
//!
//! Each step `t` (starting at 1):
//! 1. the learner turns the history into a posterior `p_t`;
//! 2. `a_t` maximizes `E_{θ~p_t} η(θ, a)`;
//! 3. Gaussian probes `u, v` are drawn;
//! 4. the environment supplies `y_t` (reward at `a_t`, reward, directional
//!    derivative and Hessian form at `a_{t−1}`);
//! 5. the record is appended to the history.
//!
//! Diagnostics use privileged access to the true parameter and never feed
//! back into the algorithm.

use crate::error::{Result, ViolinError};
use crate::learner::{
    hedge_rate, loss_bound, record_losses, ClipConstants, HypothesisSet, LearnerKind, OnlineLearner,
    PosteriorWeights, SupervisionRecord,
};
use crate::linalg::{axpy, dot, norm, project_ball, sym_spectral_norm};
use crate::metrics::{is_approx_local_max, StationaryThresholds};
use crate::model::{smoothness, Family, ModelParams, RewardQuery, SmoothnessConstants, KINK_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Finite-difference step sizes. `alpha1` is the inner (gradient) step and
/// must be at least an order of magnitude below `alpha2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiniteDiffConfig {
    alpha1: f64,
    alpha2: f64,
}

impl FiniteDiffConfig {
    pub fn new(alpha1: f64, alpha2: f64) -> Result<Self> {
        if !(alpha1 > 0.0 && alpha2 > 0.0 && alpha1.is_finite() && alpha2.is_finite()) {
            return Err(ViolinError::InvalidParams("finite-difference steps must be positive".into()));
        }
        if alpha1 > alpha2 / 10.0 {
            return Err(ViolinError::InvalidParams(format!(
                "alpha1 = {alpha1:e} must be at most alpha2/10 = {:e}",
                alpha2 / 10.0
            )));
        }
        Ok(Self { alpha1, alpha2 })
    }

    pub fn alpha1(&self) -> f64 {
        self.alpha1
    }

    pub fn alpha2(&self) -> f64 {
        self.alpha2
    }
}

impl Default for FiniteDiffConfig {
    fn default() -> Self {
        Self {
            alpha1: 1e-9,
            alpha2: 1e-4,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupervisionMode {
    FiniteDiff,
    Analytic,
}

impl SupervisionMode {
    /// Environment queries spent on `y[1..4]` (the reward at `a_t` is the
    /// realized reward and counted separately).
    pub fn queries(self) -> u64 {
        match self {
            SupervisionMode::FiniteDiff => 4,
            SupervisionMode::Analytic => 1,
        }
    }
}

fn shifted(a: &[f64], s1: f64, u: &[f64], s2: f64, v: &[f64]) -> Vec<f64> {
    let mut out = a.to_vec();
    axpy(&mut out, s1, u);
    axpy(&mut out, s2, v);
    out
}

fn check_probe_kink(env: &ModelParams, points: &[&[f64]]) -> Result<()> {
    for p in points {
        if let Some(distance) = env.kink_distance(p) {
            if distance.abs() < KINK_TOL {
                return Err(ViolinError::Kink { distance });
            }
        }
    }
    Ok(())
}

/// Builds the supervision record for `(a_t, a_prev, u, v)` from the
/// environment, charging the queries to `queries`.
#[allow(clippy::too_many_arguments)]
pub fn supervise(
    env: &ModelParams,
    a_t: &[f64],
    a_prev: &[f64],
    u: &[f64],
    v: &[f64],
    fd: &FiniteDiffConfig,
    mode: SupervisionMode,
    queries: &mut RewardQuery,
) -> Result<SupervisionRecord> {
    let y = match mode {
        SupervisionMode::Analytic => [
            env.eta(a_t)?,
            env.eta(a_prev)?,
            env.grad_dot(a_prev, u)?,
            env.hess_form(a_prev, u, v)?,
        ],
        SupervisionMode::FiniteDiff => {
            let (a1, a2) = (fd.alpha1, fd.alpha2);
            let pu = shifted(a_prev, a1, u, 0.0, v);
            let pv = shifted(a_prev, 0.0, u, a2, v);
            let puv = shifted(a_prev, a1, u, a2, v);
            check_probe_kink(env, &[a_prev, &pu, &pv, &puv])?;
            let f0 = env.eta(a_prev)?;
            let fu = env.eta(&pu)?;
            let fv = env.eta(&pv)?;
            let fuv = env.eta(&puv)?;
            [
                env.eta(a_t)?,
                f0,
                (fu - f0) / a1,
                ((fuv - fv) - (fu - f0)) / (a1 * a2),
            ]
        }
    };
    queries.add(1 + mode.queries());
    Ok(SupervisionRecord {
        a_t: a_t.to_vec(),
        a_prev: a_prev.to_vec(),
        u: u.to_vec(),
        v: v.to_vec(),
        y,
    })
}

/// Settings for the inner maximization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AscentConfig {
    pub restarts: usize,
    pub steps: usize,
    pub backtrack: f64,
    pub initial_step: f64,
}

impl Default for AscentConfig {
    fn default() -> Self {
        Self {
            restarts: 8,
            steps: 200,
            backtrack: 0.5,
            initial_step: 1.0,
        }
    }
}

/// `E_{θ~p} η(θ, ·)` restricted to hypotheses with positive weight.
pub struct Mixture<'a> {
    terms: Vec<(&'a ModelParams, f64)>,
}

impl<'a> Mixture<'a> {
    pub fn new(p: &PosteriorWeights, set: &'a HypothesisSet) -> Self {
        let terms = set
            .members()
            .iter()
            .zip(p.as_slice())
            .filter(|(_, w)| **w > 0.0)
            .map(|(m, w)| (m, *w))
            .collect();
        Self { terms }
    }

    pub fn value(&self, a: &[f64]) -> Result<f64> {
        let mut s = 0.0;
        for (m, w) in &self.terms {
            s += w * m.eta(a)?;
        }
        Ok(s)
    }

    pub fn grad(&self, a: &[f64]) -> Result<Vec<f64>> {
        let mut g = vec![0.0; a.len()];
        for (m, w) in &self.terms {
            axpy(&mut g, *w, &m.grad_a(a)?);
        }
        Ok(g)
    }

    /// `Σ p_i anchor(θ_i)`
    pub fn mean_anchor(&self, d: usize) -> Vec<f64> {
        let mut out = vec![0.0; d];
        for (m, w) in &self.terms {
            axpy(&mut out, *w, &m.anchor());
        }
        out
    }

    fn top_anchor(&self) -> Option<Vec<f64>> {
        let mut best: Option<(&ModelParams, f64)> = None;
        for (m, w) in &self.terms {
            if best.is_none_or(|(_, bw)| *w > bw) {
                best = Some((m, *w));
            }
        }
        best.map(|(m, _)| m.anchor())
    }
}

fn random_ball_point<R: Rng>(d: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
    let n = norm(&g).max(f64::MIN_POSITIVE);
    let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
    g.into_iter().map(|x| x * r / n).collect()
}

/// Projected gradient ascent with Armijo backtracking; never returns a
/// point with lower value than `start`.
fn projected_ascent(mix: &Mixture, start: Vec<f64>, bound: f64, cfg: &AscentConfig) -> Result<(Vec<f64>, f64)> {
    let mut a = start;
    project_ball(&mut a, bound);
    let mut f = mix.value(&a)?;
    let mut step = cfg.initial_step;
    for _ in 0..cfg.steps {
        let g = mix.grad(&a)?;
        if norm(&g) < 1e-13 {
            break;
        }
        let mut accepted = false;
        while step > 1e-14 {
            let mut cand = a.clone();
            axpy(&mut cand, step, &g);
            project_ball(&mut cand, bound);
            let moved: Vec<f64> = cand.iter().zip(&a).map(|(c, x)| c - x).collect();
            if norm(&moved) < 1e-15 {
                break;
            }
            let fc = mix.value(&cand)?;
            if fc >= f + 1e-4 * dot(&g, &moved) && fc > f {
                a = cand;
                f = fc;
                accepted = true;
                break;
            }
            step *= cfg.backtrack;
        }
        if !accepted {
            break;
        }
        step = (step * 2.0).min(16.0 * cfg.initial_step);
    }
    Ok((a, f))
}

/// Maximizer of the posterior-mixture reward.
///
/// Linear mixtures are concave with closed-form maximizer `Σ p_i θ_i`.
/// Other families use multistart projected ascent inside the family's action
/// ball from the previous action, the mixture mean, the heaviest
/// hypothesis's anchor, and random ball points; the best end point wins,
/// earliest start on ties.
pub fn virtual_ascent<R: Rng>(
    p: &PosteriorWeights,
    set: &HypothesisSet,
    prev: &[f64],
    cfg: &AscentConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let d = set.dim();
    let mix = Mixture::new(p, set);
    if set.family() == Family::Linear {
        let mut a = vec![0.0; d];
        for (m, w) in &mix.terms {
            if let ModelParams::Linear { theta } = m {
                axpy(&mut a, *w, theta);
            }
        }
        return Ok(a);
    }
    let bound = set.family().action_bound();
    let mut starts = vec![prev.to_vec(), mix.mean_anchor(d)];
    if let Some(top) = mix.top_anchor() {
        starts.push(top);
    }
    while starts.len() < cfg.restarts.max(1) + 1 {
        starts.push(random_ball_point(d, bound, rng));
    }
    let mut best: Option<(Vec<f64>, f64)> = None;
    for s in starts {
        let (a, f) = projected_ascent(&mix, s, bound, cfg)?;
        if best.as_ref().is_none_or(|(_, bf)| f > *bf) {
            best = Some((a, f));
        }
    }
    Ok(best.map(|(a, _)| a).unwrap_or_else(|| vec![0.0; d]))
}

/// Error diagnostics of one step, averaged over the posterior.
///
/// `d_i = sqrt(E_p Δ_i²)`, so `total² = Σ d_i² = E_p Δ²`. `mean_total` is
/// `E_p Δ`, the quantity in the one-step improvement inequality.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltaDiagnostics {
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
    pub d4: f64,
    pub total: f64,
    pub mean_total: f64,
}

/// The four per-hypothesis errors `(Δ1, Δ2, Δ3, Δ4)` against the truth.
pub fn hypothesis_errors(theta: &ModelParams, env: &ModelParams, a_t: &[f64], a_prev: &[f64]) -> Result<[f64; 4]> {
    let d1 = (theta.eta(a_t)? - env.eta(a_t)?).abs();
    let d2 = (theta.eta(a_prev)? - env.eta(a_prev)?).abs();
    let gd: Vec<f64> = theta
        .grad_a(a_prev)?
        .iter()
        .zip(env.grad_a(a_prev)?)
        .map(|(x, y)| x - y)
        .collect();
    let d3 = norm(&gd);
    let family = theta.family();
    let d4 = if family.hessian_is_parameter_free() || family.is_piecewise() {
        0.0
    } else {
        let mut h = theta.hess_a(a_prev)?;
        h.add_scaled(-1.0, &env.hess_a(a_prev)?);
        sym_spectral_norm(&h)?
    };
    Ok([d1, d2, d3, d4])
}

pub fn delta_diagnostics(
    p: &PosteriorWeights,
    set: &HypothesisSet,
    env: &ModelParams,
    a_t: &[f64],
    a_prev: &[f64],
) -> Result<DeltaDiagnostics> {
    let mut sq = [0.0; 4];
    let mut mean_total = 0.0;
    for (m, &w) in set.members().iter().zip(p.as_slice()) {
        if w == 0.0 {
            continue;
        }
        let e = hypothesis_errors(m, env, a_t, a_prev)?;
        for i in 0..4 {
            sq[i] += w * e[i] * e[i];
        }
        mean_total += w * e.iter().map(|x| x * x).sum::<f64>().sqrt();
    }
    Ok(DeltaDiagnostics {
        d1: sq[0].sqrt(),
        d2: sq[1].sqrt(),
        d3: sq[2].sqrt(),
        d4: sq[3].sqrt(),
        total: sq.iter().sum::<f64>().sqrt(),
        mean_total,
    })
}

/// How the action is chosen from the posterior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionRule {
    /// Maximize the posterior-expected reward.
    #[default]
    Mixture,
    /// Sample one hypothesis from the posterior and maximize its reward.
    /// Provided for experiments only.
    SampledTheta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolinConfig {
    pub horizon: usize,
    pub learner: LearnerKind,
    pub mode: SupervisionMode,
    pub fd: FiniteDiffConfig,
    pub ascent: AscentConfig,
    pub action_rule: ActionRule,
    /// Hedge learning rate; `None` uses the standard rate for the horizon.
    pub lr: Option<f64>,
    pub thresholds: StationaryThresholds,
    pub seed: u64,
    pub record_posteriors: bool,
}

impl ViolinConfig {
    pub fn new(horizon: usize, learner: LearnerKind, mode: SupervisionMode, seed: u64) -> Self {
        Self {
            horizon,
            learner,
            mode,
            fd: FiniteDiffConfig::default(),
            ascent: AscentConfig::default(),
            action_rule: ActionRule::Mixture,
            lr: None,
            thresholds: StationaryThresholds::new(0.1, 0.0),
            seed,
            record_posteriors: false,
        }
    }
}

/// One row of the run ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub action: Vec<f64>,
    pub real_reward: f64,
    pub virtual_reward: f64,
    pub delta: DeltaDiagnostics,
    /// Cumulative environment queries after this step.
    pub queries: u64,
    pub is_local_max: bool,
    /// `E_{p_t} ℓ_t`, the learner's expected loss on this step's record.
    pub expected_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLedger {
    pub seed: u64,
    pub initial_action: Vec<f64>,
    pub steps: Vec<StepRecord>,
    /// Cumulative loss of each hypothesis over the run.
    pub cumulative_losses: Vec<f64>,
    /// `p_t` for each step when recording is enabled.
    pub posteriors: Vec<PosteriorWeights>,
}

impl RunLedger {
    pub fn actions(&self) -> impl Iterator<Item = &[f64]> {
        self.steps.iter().map(|s| s.action.as_slice())
    }

    /// Action before step index `i` (0-based), `a_0` for the first step.
    pub fn previous_action(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.initial_action
        } else {
            &self.steps[i - 1].action
        }
    }
}

pub const KINK_RETRIES: usize = 16;

/// Mutable state of a run between steps.
pub struct ViolinState {
    learner: OnlineLearner,
    prev: Vec<f64>,
    queries: RewardQuery,
    step: usize,
    rng: ChaCha8Rng,
    history: Vec<SupervisionRecord>,
}

impl ViolinState {
    pub fn new(set: &HypothesisSet, cfg: &ViolinConfig) -> Self {
        let clips = ClipConstants::for_family(set.family());
        let lr = cfg
            .lr
            .unwrap_or_else(|| hedge_rate(set.len(), cfg.horizon, loss_bound(set.family(), &clips)));
        Self {
            learner: OnlineLearner::new(cfg.learner, set.len(), lr),
            prev: vec![0.0; set.dim()],
            queries: RewardQuery::default(),
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(cfg.seed),
            history: Vec::new(),
        }
    }

    pub fn history(&self) -> &[SupervisionRecord] {
        &self.history
    }

    pub fn learner(&self) -> &OnlineLearner {
        &self.learner
    }

    pub fn previous_action(&self) -> &[f64] {
        &self.prev
    }
}

/// One iteration of the loop. Returns the ledger row and `p_t`.
pub fn violin_step(
    state: &mut ViolinState,
    env: &ModelParams,
    set: &HypothesisSet,
    cfg: &ViolinConfig,
) -> Result<(StepRecord, PosteriorWeights)> {
    let clips = ClipConstants::for_family(set.family());
    let p = state.learner.posterior()?;
    let a_t = match cfg.action_rule {
        ActionRule::Mixture => virtual_ascent(&p, set, &state.prev, &cfg.ascent, &mut state.rng)?,
        ActionRule::SampledTheta => {
            let x: f64 = state.rng.random();
            let mut acc = 0.0;
            let mut pick = p.len() - 1;
            for (i, w) in p.as_slice().iter().enumerate() {
                acc += w;
                if x < acc {
                    pick = i;
                    break;
                }
            }
            let point = PosteriorWeights::point_mass(p.len(), pick);
            virtual_ascent(&point, set, &state.prev, &cfg.ascent, &mut state.rng)?
        }
    };
    let d = set.dim();
    let mut attempt = 0;
    let (rec, losses) = loop {
        let u: Vec<f64> = (0..d).map(|_| state.rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..d).map(|_| state.rng.sample(StandardNormal)).collect();
        let mut q = state.queries;
        let outcome = supervise(env, &a_t, &state.prev, &u, &v, &cfg.fd, cfg.mode, &mut q)
            .and_then(|rec| record_losses(set, &rec, &clips).map(|l| (rec, l, q)));
        match outcome {
            Ok((rec, losses, q)) => {
                state.queries = q;
                break (rec, losses);
            }
            Err(ViolinError::Kink { .. }) if attempt < KINK_RETRIES => attempt += 1,
            Err(ViolinError::Kink { .. }) => {
                return Err(ViolinError::KinkRetriesExhausted { retries: KINK_RETRIES })
            }
            Err(e) => return Err(e),
        }
    };
    let expected_loss = p.expect(&losses);
    state.learner.observe(&losses)?;

    let delta = delta_diagnostics(&p, set, env, &a_t, &state.prev)?;
    let virtual_reward = Mixture::new(&p, set).value(&a_t)?;
    let is_local_max = is_approx_local_max(env, &a_t, &cfg.thresholds).unwrap_or(false);
    state.step += 1;
    let record = StepRecord {
        step: state.step,
        action: a_t.clone(),
        real_reward: rec.y[0],
        virtual_reward,
        delta,
        queries: state.queries.count(),
        is_local_max,
        expected_loss,
    };
    state.history.push(rec);
    state.prev = a_t;
    Ok((record, p))
}

/// Full seeded run; deterministic in `(env, set, cfg)`.
pub fn run_violin(env: &ModelParams, set: &HypothesisSet, cfg: &ViolinConfig) -> Result<RunLedger> {
    if cfg.horizon == 0 {
        return Err(ViolinError::InvalidParams("horizon must be at least 1".into()));
    }
    crate::error::check_dim(set.dim(), env.dim())?;
    let mut state = ViolinState::new(set, cfg);
    let initial_action = state.prev.clone();
    let mut steps = Vec::with_capacity(cfg.horizon);
    let mut posteriors = Vec::new();
    for _ in 0..cfg.horizon {
        let (rec, p) = violin_step(&mut state, env, set, cfg)?;
        steps.push(rec);
        if cfg.record_posteriors {
            posteriors.push(p);
        }
    }
    Ok(RunLedger {
        seed: cfg.seed,
        initial_action,
        steps,
        cumulative_losses: state.learner.cumulative().to_vec(),
        posteriors,
    })
}

/// Outcome of the one-step improvement check at a single step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImprovementCheck {
    pub step: usize,
    /// False when `a_{t−1}` is already approximately stationary.
    pub applicable: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `η⋆(a_t) ≥ η⋆(a_{t−1}) + min(ε²/(4ζ_h), ε^{3/2}/√ζ_3rd) − C₁·E_p[Δ_t]`
/// with `C₁ = 2 + ζ_g/ζ_h` at every step whose previous action is not an
/// `(ε, 6√(ζ_3rd ε))`-approximate local maximum.
pub fn lemma1_check(ledger: &RunLedger, env: &ModelParams, eps: f64, tol: f64) -> Result<Vec<ImprovementCheck>> {
    let s: SmoothnessConstants = smoothness(env.family());
    if s.zeta_h <= 0.0 {
        return Err(ViolinError::Unsupported(
            "improvement check needs a positive Hessian bound".into(),
        ));
    }
    let mut floor = eps * eps / (4.0 * s.zeta_h);
    if s.zeta_3rd > 0.0 {
        floor = floor.min(eps.powf(1.5) / s.zeta_3rd.sqrt());
    }
    let c1 = 2.0 + s.zeta_g / s.zeta_h;
    let th = StationaryThresholds::new(eps, 6.0 * (s.zeta_3rd * eps).sqrt());
    let mut out = Vec::with_capacity(ledger.steps.len());
    for (i, rec) in ledger.steps.iter().enumerate() {
        let prev = ledger.previous_action(i);
        let applicable = !is_approx_local_max(env, prev, &th)?;
        let lhs = env.eta(&rec.action)?;
        let rhs = env.eta(prev)? + floor - c1 * rec.delta.mean_total;
        out.push(ImprovementCheck {
            step: rec.step,
            applicable,
            lhs,
            rhs,
            holds: !applicable || lhs >= rhs - tol,
        });
    }
    Ok(out)
}
