//! Online learning over a finite hypothesis set: the clipped four-term
//! supervision loss, exponential weights, follow-the-leader, sparse covers
//! and online-regret accounting.

use crate::error::{check_dim, Result, ViolinError};
use crate::linalg::Matrix;
use crate::model::{smoothness, Family, ModelParams, SmoothnessConstants};
use crate::rl::env::{mean_and_se, McEstimate};
use crate::seeding::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Clipping thresholds for the derivative terms of the loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClipConstants {
    pub kappa1: f64,
    pub kappa2: f64,
}

impl ClipConstants {
    /// `κ1 = 2ζ_g`, `κ2 = 640√2 ζ_h`.
    ///
    /// Piecewise-linear families have `ζ_h = 0`, hence `κ2 = 0`: their
    /// Hessian term carries no information and is clipped away entirely.
    pub fn from_smoothness(s: &SmoothnessConstants) -> Self {
        Self {
            kappa1: 2.0 * s.zeta_g,
            kappa2: 640.0 * 2f64.sqrt() * s.zeta_h,
        }
    }

    pub fn for_family(family: Family) -> Self {
        Self::from_smoothness(&smoothness(family))
    }
}

/// One supervision pair: the inputs `(a_t, a_prev, u, v)` and the observed
/// targets `y = [η(a_t), η(a_prev), ⟨∇η(a_prev), u⟩, uᵀ∇²η(a_prev)v]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisionRecord {
    pub a_t: Vec<f64>,
    pub a_prev: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub y: [f64; 4],
}

/// The model's own prediction `ŷ` for a record's inputs.
pub fn predict(theta: &ModelParams, rec: &SupervisionRecord) -> Result<[f64; 4]> {
    Ok([
        theta.eta(&rec.a_t)?,
        theta.eta(&rec.a_prev)?,
        theta.grad_dot(&rec.a_prev, &rec.u)?,
        theta.hess_form(&rec.a_prev, &rec.u, &rec.v)?,
    ])
}

pub fn bandit_loss(theta: &ModelParams, rec: &SupervisionRecord, clips: &ClipConstants) -> Result<f64> {
    let yh = predict(theta, rec)?;
    let y = &rec.y;
    let sq = |i: usize| (yh[i] - y[i]) * (yh[i] - y[i]);
    Ok(sq(0) + sq(1) + sq(2).min(clips.kappa1 * clips.kappa1) + sq(3).min(clips.kappa2 * clips.kappa2))
}

/// Uniform bound `v` on the loss, used to set the Hedge rate.
///
/// When the family's Hessian is parameter-free, the fourth term is
/// identical across hypotheses and cannot separate them, so it is left out
/// of the bound (including it would only shrink the rate).
pub fn loss_bound(family: Family, clips: &ClipConstants) -> f64 {
    let r = family.reward_range();
    let mut v = 2.0 * r * r + clips.kappa1 * clips.kappa1;
    if !family.hessian_is_parameter_free() {
        v += clips.kappa2 * clips.kappa2;
    }
    v
}

/// Standard Hedge rate `√(8 ln n / T) / v`.
pub fn hedge_rate(n: usize, horizon: usize, v: f64) -> f64 {
    (8.0 * (n as f64).ln() / horizon.max(1) as f64).sqrt() / v
}

/// Probability vector over hypothesis indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorWeights {
    p: Vec<f64>,
}

impl PosteriorWeights {
    pub fn uniform(n: usize) -> Self {
        Self {
            p: vec![1.0 / n as f64; n],
        }
    }

    pub fn point_mass(n: usize, i: usize) -> Self {
        let mut p = vec![0.0; n];
        p[i] = 1.0;
        Self { p }
    }

    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() || p.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(ViolinError::InvalidParams("weights must be finite and nonnegative".into()));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(ViolinError::InvalidParams(format!("weights sum to {s}, not 1")));
        }
        Ok(Self { p })
    }

    /// Builds weights proportional to `exp(logits)`.
    pub fn from_log_weights(logits: &[f64]) -> Result<Self> {
        let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if !m.is_finite() {
            return Err(ViolinError::NumericalUnderflow);
        }
        let w: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
        let s: f64 = w.iter().sum();
        Ok(Self {
            p: w.into_iter().map(|x| x / s).collect(),
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.p
    }

    pub fn len(&self) -> usize {
        self.p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p.is_empty()
    }

    /// Index of the largest weight, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &w) in self.p.iter().enumerate() {
            if w > self.p[best] {
                best = i;
            }
        }
        best
    }

    /// `E_p[x]`
    pub fn expect(&self, values: &[f64]) -> f64 {
        self.p.iter().zip(values).map(|(p, x)| p * x).sum()
    }
}

/// `p'_i ∝ p_i exp(−lr·loss_i)`, computed in the log domain.
pub fn exp_weights_update(p: &PosteriorWeights, losses: &[f64], lr: f64) -> Result<PosteriorWeights> {
    check_dim(p.len(), losses.len())?;
    if losses.iter().any(|l| !l.is_finite()) {
        return Err(ViolinError::InvalidParams("losses must be finite".into()));
    }
    let logits: Vec<f64> = p
        .as_slice()
        .iter()
        .zip(losses)
        .map(|(pi, l)| pi.ln() - lr * l)
        .collect();
    PosteriorWeights::from_log_weights(&logits)
}

/// Monte Carlo estimate of `E[min(κ², (uᵀHv)²)]` for independent standard
/// Gaussian `u, v`: how much the clipped Hessian term of the loss retains.
/// The clip keeps at least half of `min(c², ‖H‖_F²)` whenever `κ ≥ 640√2·c`.
pub fn clipped_bilinear_moment(h: &Matrix, kappa: f64, n: usize, seed: u64) -> Result<McEstimate> {
    if h.rows() != h.cols() {
        return Err(ViolinError::DimensionMismatch {
            expected: h.rows(),
            found: h.cols(),
        });
    }
    let scale = h.frobenius().max(1.0);
    let dev = h.asymmetry();
    if dev > 1e-12 * scale {
        return Err(ViolinError::Asymmetric { max_dev: dev });
    }
    if n < 2 {
        return Err(ViolinError::InvalidParams("need at least two probe pairs".into()));
    }
    let d = h.rows();
    let k2 = kappa * kappa;
    let mut rng = stream(seed, 0);
    let xs: Vec<f64> = (0..n)
        .map(|_| {
            let u: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let b = h.bilinear(&u, &v);
            (b * b).min(k2)
        })
        .collect();
    Ok(mean_and_se(&xs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Provenance {
    Explicit,
    Cover { resolution: f64, description: String },
}

/// Nonempty finite hypothesis class, all members from one family and of one
/// dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisSet {
    members: Vec<ModelParams>,
    provenance: Provenance,
}

impl HypothesisSet {
    pub fn new(members: Vec<ModelParams>, provenance: Provenance) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| ViolinError::InvalidParams("hypothesis set is empty".into()))?;
        let (family, dim) = (first.family(), first.dim());
        for m in &members {
            if m.family() != family {
                return Err(ViolinError::InvalidParams("mixed families in hypothesis set".into()));
            }
            check_dim(dim, m.dim())?;
        }
        Ok(Self { members, provenance })
    }

    pub fn explicit(members: Vec<ModelParams>) -> Result<Self> {
        Self::new(members, Provenance::Explicit)
    }

    pub fn members(&self) -> &[ModelParams] {
        &self.members
    }

    pub fn provenance(&self) -> &Provenance {
        &self.provenance
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn family(&self) -> Family {
        self.members[0].family()
    }

    pub fn dim(&self) -> usize {
        self.members[0].dim()
    }
}

const PARALLEL_MIN: usize = 64;

/// Loss of every hypothesis on one record, in index order.
pub fn record_losses(set: &HypothesisSet, rec: &SupervisionRecord, clips: &ClipConstants) -> Result<Vec<f64>> {
    if set.len() >= PARALLEL_MIN {
        set.members().par_iter().map(|m| bandit_loss(m, rec, clips)).collect()
    } else {
        set.members().iter().map(|m| bandit_loss(m, rec, clips)).collect()
    }
}

/// Point mass on a cumulative-loss minimizer, lowest index on ties.
pub fn ftl_update(history: &[SupervisionRecord], set: &HypothesisSet, clips: &ClipConstants) -> Result<PosteriorWeights> {
    let mut totals = vec![0.0; set.len()];
    for rec in history {
        for (t, l) in totals.iter_mut().zip(record_losses(set, rec, clips)?) {
            *t += l;
        }
    }
    Ok(PosteriorWeights::point_mass(set.len(), argmin_lowest(&totals)))
}

fn argmin_lowest(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x < v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LearnerKind {
    Hedge,
    Ftl,
}

/// Incremental learner state: cumulative loss per hypothesis.
///
/// Hedge from a uniform prior is `p ∝ exp(−lr·L)`, so keeping cumulative
/// losses is equivalent to chaining [`exp_weights_update`] and avoids
/// accumulated rounding in the weights.
#[derive(Debug, Clone)]
pub struct OnlineLearner {
    kind: LearnerKind,
    lr: f64,
    cumulative: Vec<f64>,
}

impl OnlineLearner {
    pub fn new(kind: LearnerKind, n: usize, lr: f64) -> Self {
        Self {
            kind,
            lr,
            cumulative: vec![0.0; n],
        }
    }

    pub fn kind(&self) -> LearnerKind {
        self.kind
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn cumulative(&self) -> &[f64] {
        &self.cumulative
    }

    pub fn posterior(&self) -> Result<PosteriorWeights> {
        match self.kind {
            LearnerKind::Ftl => Ok(PosteriorWeights::point_mass(
                self.cumulative.len(),
                argmin_lowest(&self.cumulative),
            )),
            LearnerKind::Hedge => {
                let logits: Vec<f64> = self.cumulative.iter().map(|l| -self.lr * l).collect();
                PosteriorWeights::from_log_weights(&logits)
            }
        }
    }

    pub fn observe(&mut self, losses: &[f64]) -> Result<()> {
        check_dim(self.cumulative.len(), losses.len())?;
        for (c, l) in self.cumulative.iter_mut().zip(losses) {
            *c += l;
        }
        Ok(())
    }
}

/// `Σ_t E_{p_t} ℓ_t − min_i Σ_t ℓ_{t,i}`.
pub fn online_regret(losses: &[Vec<f64>], expected: &[f64]) -> Result<f64> {
    check_dim(losses.len(), expected.len())?;
    let n = losses.first().map_or(0, Vec::len);
    let mut totals = vec![0.0; n];
    for row in losses {
        check_dim(n, row.len())?;
        for (t, l) in totals.iter_mut().zip(row) {
            *t += l;
        }
    }
    let best = totals.iter().cloned().fold(f64::INFINITY, f64::min);
    let best = if best.is_finite() { best } else { 0.0 };
    Ok(expected.iter().sum::<f64>() - best)
}

/// Default cap on the size of a generated cover.
pub const DEFAULT_COVER_BUDGET: usize = 2_000_000;

fn binomial(n: usize, k: usize) -> usize {
    let k = k.min(n - k);
    let mut r: u128 = 1;
    for i in 0..k {
        r = r * (n - i) as u128 / (i + 1) as u128;
    }
    r.min(usize::MAX as u128) as usize
}

fn for_each_subset(d: usize, s: usize, mut f: impl FnMut(&[usize])) {
    let mut idx: Vec<usize> = (0..s).collect();
    loop {
        f(&idx);
        let mut i = s;
        while i > 0 && idx[i - 1] == d - s + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..s {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Unit vectors on one `s`-dimensional coordinate sphere, at most `δ` from
/// every point of that sphere.
fn subspace_grid(s: usize, resolution: f64) -> Vec<Vec<f64>> {
    match s {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let n = (std::f64::consts::PI / resolution).ceil() as usize;
            let n = n.max(4);
            (0..n)
                .map(|k| {
                    let t = 2.0 * std::f64::consts::PI * k as f64 / n as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        _ => {
            // Grid on the faces of [-1, 1]^s, projected to the sphere. A
            // face grid with spacing h leaves every face point within
            // h√(s−1)/2, and radial projection at most doubles that.
            let h = resolution / ((s - 1) as f64).sqrt();
            let per_axis = (2.0 / h).ceil() as usize + 1;
            let step = 2.0 / (per_axis - 1) as f64;
            let mut out = Vec::new();
            let mut counter = vec![0usize; s - 1];
            for face_axis in 0..s {
                for sign in [1.0, -1.0] {
                    counter.iter_mut().for_each(|c| *c = 0);
                    loop {
                        let mut p = Vec::with_capacity(s);
                        let mut k = 0;
                        for axis in 0..s {
                            if axis == face_axis {
                                p.push(sign);
                            } else {
                                p.push(-1.0 + step * counter[k] as f64);
                                k += 1;
                            }
                        }
                        let n = crate::linalg::norm(&p);
                        out.push(p.into_iter().map(|x| x / n).collect());
                        let mut j = 0;
                        while j < s - 1 {
                            counter[j] += 1;
                            if counter[j] < per_axis {
                                break;
                            }
                            counter[j] = 0;
                            j += 1;
                        }
                        if j == s - 1 {
                            break;
                        }
                    }
                }
            }
            out
        }
    }
}

fn subspace_grid_size(s: usize, resolution: f64) -> usize {
    match s {
        1 => 2,
        2 => ((std::f64::consts::PI / resolution).ceil() as usize).max(4),
        _ => {
            let h = resolution / ((s - 1) as f64).sqrt();
            let per_axis = (2.0 / h).ceil() as usize + 1;
            2 * s * per_axis.saturating_pow((s - 1) as u32)
        }
    }
}

/// Cover of the `s`-sparse unit vectors in `R^d` by linear hypotheses.
///
/// For each `s`-subset of coordinates, places a grid on that coordinate
/// sphere whose covering radius is at most `resolution`. Members from
/// different subsets may coincide; they are kept, which only repeats
/// hypotheses.
pub fn build_sparse_cover(d: usize, s: usize, resolution: f64, budget: usize) -> Result<HypothesisSet> {
    if s == 0 || s > d {
        return Err(ViolinError::InvalidParams(format!("need 1 ≤ s ≤ d, got s={s}, d={d}")));
    }
    if !(resolution > 0.0 && resolution < 1.0) {
        return Err(ViolinError::InvalidParams("resolution must lie in (0, 1)".into()));
    }
    let per = subspace_grid_size(s, resolution);
    let needed = binomial(d, s).saturating_mul(per);
    if needed > budget {
        return Err(ViolinError::BudgetExceeded { needed, budget });
    }
    let grid = subspace_grid(s, resolution);
    let mut members = Vec::with_capacity(needed);
    for_each_subset(d, s, |subset| {
        for g in &grid {
            let mut theta = vec![0.0; d];
            for (k, &i) in subset.iter().enumerate() {
                theta[i] = g[k];
            }
            members.push(ModelParams::Linear { theta });
        }
    });
    HypothesisSet::new(
        members,
        Provenance::Cover {
            resolution,
            description: format!("{s}-sparse unit vectors in dimension {d}"),
        },
    )
}
