//! Score-function (REINFORCE) estimators of the policy gradient and
//! Hessian of `η(θ, ψ)`.
//!
//! Matrices over `vec(ψ)` use row-major order: entry `ψ_ij` sits at index
//! `i·d + j`.

use super::env::{map_rollouts, DynamicsParams, MdpSpec, PolicyParams, Trajectory};
use crate::error::{Result, ViolinError};
use crate::linalg::{dot, Matrix};
use serde::{Deserialize, Serialize};

/// `∇_ψ log π_ψ(a|s) = (a − ψs) sᵀ / σ²`
pub fn score_grad(psi: &PolicyParams, s: &[f64], a: &[f64], sigma: f64) -> Matrix {
    let mean = psi.mean_action(s);
    let r: Vec<f64> = a.iter().zip(&mean).map(|(x, m)| x - m).collect();
    Matrix::outer(&r, s).scaled(1.0 / (sigma * sigma))
}

/// `vᵀ ∇²_ψ log π_ψ(a|s) w = −⟨w s, v s⟩ / σ²`, independent of the action.
pub fn score_hess_form(s: &[f64], v: &Matrix, w: &Matrix, sigma: f64) -> f64 {
    -dot(&w.matvec(s), &v.matvec(s)) / (sigma * sigma)
}

/// `∇²_ψ log π = −(I ⊗ s sᵀ)/σ²` as a `d² × d²` matrix.
fn score_hess_matrix(s: &[f64], sigma: f64) -> Matrix {
    let d = s.len();
    let mut m = Matrix::zeros(d * d, d * d);
    let c = -1.0 / (sigma * sigma);
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                m[(i * d + j, i * d + k)] = c * s[j] * s[k];
            }
        }
    }
    m
}

/// Summed score `Σ_h ∇_ψ log π(a_h|s_h)` of a trajectory.
pub fn trajectory_score(psi: &PolicyParams, tau: &Trajectory, sigma: f64) -> Matrix {
    let d = psi.dim();
    let mut f = Matrix::zeros(d, d);
    for h in 0..tau.horizon() {
        f.add_scaled(1.0, &score_grad(psi, &tau.states[h], &tau.actions[h], sigma));
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixEstimate {
    pub value: Matrix,
    /// Componentwise standard error.
    pub se: Matrix,
}

impl MatrixEstimate {
    /// `√(Σ se²)`, the standard error of the Frobenius-norm estimate's
    /// components combined.
    pub fn se_norm(&self) -> f64 {
        self.se.frobenius()
    }

    /// `‖value‖_F + 3·se_norm`
    pub fn certificate(&self) -> f64 {
        self.value.frobenius() + 3.0 * self.se_norm()
    }
}

/// Mean and standard error of per-sample matrices `x_i`.
fn matrix_mean_se(samples: &[Matrix]) -> MatrixEstimate {
    let n = samples.len();
    let (r, c) = (samples[0].rows(), samples[0].cols());
    let mut mean = Matrix::zeros(r, c);
    for x in samples {
        mean.add_scaled(1.0 / n as f64, x);
    }
    let mut var = Matrix::zeros(r, c);
    if n > 1 {
        for x in samples {
            for (v, (xi, mi)) in var
                .as_mut_slice()
                .iter_mut()
                .zip(x.as_slice().iter().zip(mean.as_slice()))
            {
                *v += (xi - mi) * (xi - mi);
            }
        }
        for v in var.as_mut_slice() {
            *v = (*v / ((n - 1) as f64) / n as f64).sqrt();
        }
    }
    MatrixEstimate { value: mean, se: var }
}

/// Centered weights `R_i − b_i` with the leave-one-out mean baseline
/// `b_i = (Σ_j R_j − R_i)/(n − 1)`, which keeps every term unbiased.
fn loo_advantages(returns: &[f64]) -> Vec<f64> {
    let n = returns.len();
    if n < 2 {
        return returns.to_vec();
    }
    let total: f64 = returns.iter().sum();
    returns
        .iter()
        .map(|r| r - (total - r) / (n - 1) as f64)
        .collect()
}

/// Per-rollout `(summed score, return)` pairs for a batch.
pub(crate) fn score_batch(
    theta: &DynamicsParams,
    psi: &PolicyParams,
    spec: &MdpSpec,
    n: usize,
    seed: u64,
) -> Vec<(Matrix, f64)> {
    map_rollouts(theta, psi, spec, n, seed, |tau| {
        (trajectory_score(psi, tau, spec.sigma), tau.total_reward())
    })
}

/// REINFORCE gradient from a batch of trajectories (model or real).
pub fn reinforce_grad_from(psi: &PolicyParams, spec: &MdpSpec, trajectories: &[Trajectory]) -> Result<MatrixEstimate> {
    if trajectories.is_empty() {
        return Err(ViolinError::InvalidParams("need at least one trajectory".into()));
    }
    let pairs: Vec<(Matrix, f64)> = trajectories
        .iter()
        .map(|t| (trajectory_score(psi, t, spec.sigma), t.total_reward()))
        .collect();
    Ok(grad_from_pairs(pairs))
}

fn grad_from_pairs(pairs: Vec<(Matrix, f64)>) -> MatrixEstimate {
    let returns: Vec<f64> = pairs.iter().map(|(_, r)| *r).collect();
    let adv = loo_advantages(&returns);
    let samples: Vec<Matrix> = pairs
        .into_iter()
        .zip(adv)
        .map(|((f, _), a)| f.scaled(a))
        .collect();
    matrix_mean_se(&samples)
}

/// Monte Carlo estimate of `∇_ψ η(θ, ψ)` as a `d × d` matrix.
pub fn reinforce_grad(theta: &DynamicsParams, psi: &PolicyParams, spec: &MdpSpec, n: usize, seed: u64) -> Result<MatrixEstimate> {
    if n == 0 {
        return Err(ViolinError::InvalidParams("need at least one rollout".into()));
    }
    Ok(grad_from_pairs(score_batch(theta, psi, spec, n, seed)))
}

/// Largest `d` for which the `d² × d²` Hessian estimate is formed.
pub const MAX_HESS_DIM: usize = 4;

/// Monte Carlo estimate of `∇²_ψ η(θ, ψ)` over `vec(ψ)`:
/// `E[(f fᵀ + Σ_h ∇²_ψ log π(a_h|s_h)) (R − b)]` with `f` the summed score,
/// symmetrized.
pub fn reinforce_hess(theta: &DynamicsParams, psi: &PolicyParams, spec: &MdpSpec, n: usize, seed: u64) -> Result<MatrixEstimate> {
    if n == 0 {
        return Err(ViolinError::InvalidParams("need at least one rollout".into()));
    }
    let d = spec.d;
    if d > MAX_HESS_DIM {
        return Err(ViolinError::BudgetExceeded {
            needed: d,
            budget: MAX_HESS_DIM,
        });
    }
    let sigma = spec.sigma;
    let parts = map_rollouts(theta, psi, spec, n, seed, |tau| {
        let f = trajectory_score(psi, tau, sigma);
        let fv = f.as_slice();
        let mut m = Matrix::outer(fv, fv);
        for h in 0..tau.horizon() {
            m.add_scaled(1.0, &score_hess_matrix(&tau.states[h], sigma));
        }
        (m, tau.total_reward())
    });
    let returns: Vec<f64> = parts.iter().map(|(_, r)| *r).collect();
    let adv = loo_advantages(&returns);
    let samples: Vec<Matrix> = parts
        .into_iter()
        .zip(adv)
        .map(|((m, _), a)| {
            let mut s = m.scaled(a);
            s.symmetrize();
            s
        })
        .collect();
    Ok(matrix_mean_se(&samples))
}
