//! Approximate-local-maximum detection, local regret and standard regret.
//!
//! Local regret compares each realized reward with the worst reward over
//! the set of `(ε_g, ε_h)`-approximate local maxima of the true reward.
//! When that infimum is found by search, the reported worst value is an
//! upper bound on the true infimum, so the reported local regret is a
//! lower bound.

use crate::error::{Result, ViolinError};
use crate::linalg::{axpy, lambda_max, norm, project_ball};
use crate::model::{smoothness, Family, ModelParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryThresholds {
    pub eps_g: f64,
    pub eps_h: f64,
}

impl StationaryThresholds {
    pub fn new(eps_g: f64, eps_h: f64) -> Self {
        Self { eps_g, eps_h }
    }

    /// `(ε, 6√(ζ_3rd ε))`
    pub fn paired(eps: f64, zeta_3rd: f64) -> Self {
        Self::new(eps, 6.0 * (zeta_3rd * eps).sqrt())
    }

    /// Harness default per family: `ε = min(0.1, ζ_3rd/16)` paired with its
    /// Hessian threshold when `ζ_3rd > 0`; Linear uses `(0.1, −½)` since
    /// the paired Hessian threshold would degenerate to 0; the piecewise
    /// families use `(0.1, 0)`.
    pub fn default_for(family: Family) -> Self {
        let s = smoothness(family);
        match family {
            Family::Linear => Self::new(0.1, -0.5),
            _ if s.zeta_3rd > 0.0 => Self::paired(0.1f64.min(s.zeta_3rd / 16.0), s.zeta_3rd),
            _ => Self::new(0.1, 0.0),
        }
    }
}

/// `‖∇η(a)‖ ≤ ε_g` and `λ_max(∇²η(a)) ≤ ε_h`.
pub fn is_approx_local_max(env: &ModelParams, a: &[f64], th: &StationaryThresholds) -> Result<bool> {
    let g = env.grad_a(a)?;
    if norm(&g) > th.eps_g {
        return Ok(false);
    }
    let h = env.hess_a(a)?;
    Ok(lambda_max(&h)? <= th.eps_h)
}

/// Representatives of the approximate-local-maximum set and the lowest
/// true reward among them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalMaxSet {
    pub members: Vec<Vec<f64>>,
    pub worst_value: f64,
    /// True when `worst_value` is the exact infimum.
    pub exact: bool,
}

const ASCENT_STEPS: usize = 500;
const PATTERN_ROUNDS: usize = 400;

fn passes(env: &ModelParams, a: &[f64], th: &StationaryThresholds) -> bool {
    is_approx_local_max(env, a, th).unwrap_or(false)
}

fn ascend(env: &ModelParams, mut a: Vec<f64>, bound: f64) -> Result<Vec<f64>> {
    let mut f = env.eta(&a)?;
    let mut step = 1.0;
    for _ in 0..ASCENT_STEPS {
        let g = env.grad_a(&a)?;
        if norm(&g) < 1e-12 {
            break;
        }
        let mut moved = false;
        while step > 1e-14 {
            let mut c = a.clone();
            axpy(&mut c, step, &g);
            project_ball(&mut c, bound);
            let fc = env.eta(&c)?;
            if fc > f {
                a = c;
                f = fc;
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
        step = (step * 2.0).min(16.0);
    }
    Ok(a)
}

/// Pattern search that lowers `η` while staying inside the detected set.
fn descend_within<R: Rng>(env: &ModelParams, mut a: Vec<f64>, th: &StationaryThresholds, bound: f64, rng: &mut R) -> Result<Vec<f64>> {
    let d = a.len();
    let mut f = env.eta(&a)?;
    let mut step = 0.25;
    let mut rounds = 0;
    while step > 1e-9 && rounds < PATTERN_ROUNDS {
        rounds += 1;
        let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(2 * d + 4);
        let g = env.grad_a(&a)?;
        let gn = norm(&g);
        if gn > 0.0 {
            dirs.push(g.iter().map(|x| -x / gn).collect());
        }
        for i in 0..d {
            for s in [1.0, -1.0] {
                let mut e = vec![0.0; d];
                e[i] = s;
                dirs.push(e);
            }
        }
        for _ in 0..4 {
            let r: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            let n = norm(&r);
            dirs.push(r.into_iter().map(|x| x / n).collect());
        }
        let mut improved = false;
        for dir in dirs {
            let mut c = a.clone();
            axpy(&mut c, step, &dir);
            if norm(&c) > bound {
                continue;
            }
            let fc = env.eta(&c)?;
            if fc < f && passes(env, &c, th) {
                a = c;
                f = fc;
                improved = true;
                break;
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(a)
}

/// Finds members of the approximate-local-maximum set of `env`.
///
/// Linear and needle rewards use their closed-form characterizations. Other
/// families run `budget` random-start ascents, keep the end points that pass
/// the detector, and push each of them downhill within the set.
pub fn find_local_max_set(env: &ModelParams, th: &StationaryThresholds, budget: usize, seed: u64) -> Result<LocalMaxSet> {
    if budget == 0 {
        return Err(ViolinError::InvalidParams("search budget must be at least 1".into()));
    }
    match env {
        ModelParams::Linear { theta } => {
            // ‖∇η‖ = ‖θ − a‖ and η(a) = η(θ) − ½‖θ − a‖², so the set is the
            // ε_g ball around θ whenever −1 ≤ ε_h.
            if th.eps_h < -1.0 || th.eps_g < 0.0 {
                return Err(ViolinError::EmptyLocalMaxSet);
            }
            let n = norm(theta);
            let dir: Vec<f64> = if n > 0.0 {
                theta.iter().map(|x| -x / n).collect()
            } else {
                let mut e = vec![0.0; theta.len()];
                e[0] = 1.0;
                e
            };
            let mut edge = theta.clone();
            axpy(&mut edge, th.eps_g, &dir);
            let best = env.eta(theta)?;
            Ok(LocalMaxSet {
                members: vec![theta.clone(), edge],
                worst_value: best - 0.5 * th.eps_g * th.eps_g,
                exact: true,
            })
        }
        ModelParams::ReluNeedle { theta, .. } => {
            // Flat region: gradient and Hessian vanish, reward 0, and no
            // point of the ball has negative reward.
            if th.eps_h < 0.0 || th.eps_g < 0.0 {
                return Err(ViolinError::EmptyLocalMaxSet);
            }
            Ok(LocalMaxSet {
                members: vec![vec![0.0; theta.len()]],
                worst_value: 0.0,
                exact: true,
            })
        }
        _ => {
            let d = env.dim();
            let bound = env.family().action_bound();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut members = Vec::new();
            for _ in 0..budget {
                let g: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let r = bound * rng.random::<f64>().powf(1.0 / d as f64);
                let n = norm(&g).max(f64::MIN_POSITIVE);
                let start: Vec<f64> = g.into_iter().map(|x| x * r / n).collect();
                let top = ascend(env, start, bound)?;
                if passes(env, &top, th) {
                    let low = descend_within(env, top.clone(), th, bound, &mut rng)?;
                    members.push(top);
                    members.push(low);
                }
            }
            if members.is_empty() {
                return Err(ViolinError::EmptyLocalMaxSet);
            }
            let mut worst = f64::INFINITY;
            for m in &members {
                worst = worst.min(env.eta(m)?);
            }
            Ok(LocalMaxSet {
                members,
                worst_value: worst,
                exact: false,
            })
        }
    }
}

/// Local regret of a reward sequence, signed and clipped at zero per step,
/// with running prefix sums.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalRegret {
    pub signed: f64,
    pub clipped: f64,
    pub signed_prefix: Vec<f64>,
    pub clipped_prefix: Vec<f64>,
}

/// `Σ_t (worst − η⋆(a_t))` where `rewards[t] = η⋆(a_t)`.
pub fn local_regret(rewards: &[f64], set: &LocalMaxSet) -> LocalRegret {
    let mut signed = 0.0;
    let mut clipped = 0.0;
    let mut signed_prefix = Vec::with_capacity(rewards.len());
    let mut clipped_prefix = Vec::with_capacity(rewards.len());
    for r in rewards {
        let gap = set.worst_value - r;
        signed += gap;
        clipped += gap.max(0.0);
        signed_prefix.push(signed);
        clipped_prefix.push(clipped);
    }
    LocalRegret {
        signed,
        clipped,
        signed_prefix,
        clipped_prefix,
    }
}

/// Running `Σ_t (η⋆(a⋆) − η⋆(a_t))` for families with a known optimum.
pub fn standard_regret_prefix(rewards: &[f64], env: &ModelParams) -> Result<Vec<f64>> {
    let opt = env
        .known_optimum()
        .ok_or_else(|| ViolinError::Unsupported(format!("no known optimum for {:?}", env.family())))?;
    let best = env.eta(&opt)?;
    let mut acc = 0.0;
    Ok(rewards
        .iter()
        .map(|r| {
            acc += best - r;
            acc
        })
        .collect())
}

pub fn standard_regret(rewards: &[f64], env: &ModelParams) -> Result<f64> {
    Ok(standard_regret_prefix(rewards, env)?.last().copied().unwrap_or(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_detector_examples() {
        let env = ModelParams::linear(vec![1.0, 0.0]).unwrap();
        let th = StationaryThresholds::new(0.0, -1.0);
        assert!(is_approx_local_max(&env, &[1.0, 0.0], &th).unwrap());
        let th = StationaryThresholds::new(0.1, 0.0);
        assert!(!is_approx_local_max(&env, &[0.0, 0.0], &th).unwrap());
    }

    #[test]
    fn needle_flat_region_passes_zero_thresholds() {
        let env = ModelParams::relu_needle(vec![0.0, 1.0], 0.1).unwrap();
        let th = StationaryThresholds::new(0.0, 0.0);
        assert!(is_approx_local_max(&env, &[0.3, 0.2], &th).unwrap());
        let set = find_local_max_set(&env, &th, 1, 0).unwrap();
        assert_eq!(set.worst_value, 0.0);
    }

    #[test]
    fn linear_worst_value_closed_form() {
        let env = ModelParams::linear(vec![0.6, 0.8]).unwrap();
        let set = find_local_max_set(&env, &StationaryThresholds::new(0.2, -0.5), 1, 0).unwrap();
        assert!((set.worst_value - (0.5 - 0.02)).abs() < 1e-15);
        for m in &set.members {
            assert!(is_approx_local_max(&env, m, &StationaryThresholds::new(0.2 + 1e-12, -0.5)).unwrap());
        }
    }

    #[test]
    fn standard_regret_of_zero_actions() {
        let env = ModelParams::linear(vec![0.6, 0.8]).unwrap();
        let rewards = vec![env.eta(&[0.0, 0.0]).unwrap(); 7];
        assert!((standard_regret(&rewards, &env).unwrap() - 3.5).abs() < 1e-12);
    }

    #[test]
    fn two_layer_has_no_known_optimum() {
        let w1 = crate::linalg::Matrix::from_rows(&[vec![0.5, 0.5]]).unwrap();
        let env = ModelParams::two_layer(w1, vec![1.0]).unwrap();
        assert!(matches!(standard_regret(&[0.0], &env), Err(ViolinError::Unsupported(_))));
    }

    #[test]
    fn local_regret_sums() {
        let set = LocalMaxSet {
            members: vec![],
            worst_value: 1.0,
            exact: true,
        };
        let r = local_regret(&[0.5, 2.0, 1.0], &set);
        assert_eq!(r.signed, -0.5);
        assert_eq!(r.clipped, 0.5);
        assert_eq!(r.signed_prefix, vec![0.5, -0.5, -0.5]);
    }
}
