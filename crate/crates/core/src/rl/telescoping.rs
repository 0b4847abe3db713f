//! Exact value-gap decomposition by enumerating every trajectory under a
//! two-point policy noise.
//!
//! The Gaussian noise `u_h` is replaced by a uniform draw from `{−1, +1}^d`,
//! so each step has `2^d` equally likely actions and a horizon-`H` rollout
//! has `2^{dH}` outcomes. Both sides of
//!
//! `V_{T̂}(s₁) − V_T(s₁) = E_{τ∼T} Σ_h [V_{T̂,h+1}(T̂(s_h,a_h)) − V_{T̂,h+1}(T(s_h,a_h))]`
//!
//! are then computed exactly.

use super::env::{DynamicsParams, InitialState, MdpSpec, PolicyParams};
use crate::error::{Result, ViolinError};

/// Maximum number of enumerated trajectories.
pub const ENUMERATION_BUDGET: usize = 1 << 20;
pub const MAX_ENUM_HORIZON: usize = 6;

fn atoms(d: usize) -> Vec<Vec<f64>> {
    (0..1usize << d)
        .map(|mask| {
            (0..d)
                .map(|i| if mask >> i & 1 == 1 { 1.0 } else { -1.0 })
                .collect()
        })
        .collect()
}

struct Enumerator<'a> {
    psi: &'a PolicyParams,
    spec: &'a MdpSpec,
    atoms: Vec<Vec<f64>>,
}

impl Enumerator<'_> {
    fn action(&self, s: &[f64], u: &[f64]) -> Vec<f64> {
        let mut a = self.psi.mean_action(s);
        for (ai, ui) in a.iter_mut().zip(u) {
            *ai += self.spec.sigma * ui;
        }
        a
    }

    /// `V_{model, h}(s)` for 0-based step `h`; zero past the horizon.
    fn value(&self, model: &DynamicsParams, s: &[f64], h: usize) -> f64 {
        if h >= self.spec.horizon {
            return 0.0;
        }
        let mut acc = 0.0;
        for u in &self.atoms {
            let a = self.action(s, u);
            acc += self.spec.reward.eval(s, &a) + self.value(model, &model.step(s, &a), h + 1);
        }
        acc / self.atoms.len() as f64
    }

    /// Expected telescoped sum from step `h` onward along true dynamics.
    fn telescoped(&self, model: &DynamicsParams, truth: &DynamicsParams, s: &[f64], h: usize) -> f64 {
        if h >= self.spec.horizon {
            return 0.0;
        }
        let mut acc = 0.0;
        for u in &self.atoms {
            let a = self.action(s, u);
            let real_next = truth.step(s, &a);
            acc += self.value(model, &model.step(s, &a), h + 1) - self.value(model, &real_next, h + 1);
            acc += self.telescoped(model, truth, &real_next, h + 1);
        }
        acc / self.atoms.len() as f64
    }
}

/// Returns `(lhs, rhs)` of the identity; they agree up to rounding.
pub fn telescoping_check(
    theta_hat: &DynamicsParams,
    truth: &DynamicsParams,
    psi: &PolicyParams,
    spec: &MdpSpec,
) -> Result<(f64, f64)> {
    let s1 = match &spec.initial {
        InitialState::Point { state } => state.clone(),
        InitialState::Ball { .. } => {
            return Err(ViolinError::InvalidParams(
                "exact enumeration needs a point-mass initial state".into(),
            ))
        }
    };
    let per_step = 1usize.checked_shl(spec.d as u32).unwrap_or(usize::MAX);
    let needed = (0..spec.horizon).try_fold(1usize, |acc, _| acc.checked_mul(per_step));
    match needed {
        Some(n) if n <= ENUMERATION_BUDGET && spec.horizon <= MAX_ENUM_HORIZON => {}
        _ => {
            return Err(ViolinError::BudgetExceeded {
                needed: needed.unwrap_or(usize::MAX),
                budget: ENUMERATION_BUDGET,
            })
        }
    }
    let en = Enumerator {
        psi,
        spec,
        atoms: atoms(spec.d),
    };
    let lhs = en.value(theta_hat, &s1, 0) - en.value(truth, &s1, 0);
    let rhs = en.telescoped(theta_hat, truth, &s1, 0);
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rl::env::Reward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_models_give_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = DynamicsParams::random(2, 4, 1.5, &mut rng);
        let spec = MdpSpec::new(
            2,
            2,
            InitialState::Point { state: vec![0.2, 0.1] },
            Reward::Goal { goal: vec![0.5, 0.5], action_cost: 0.0 },
            0.5,
        )
        .unwrap();
        let (l, r) = telescoping_check(&t, &t, &PolicyParams::zeros(2), &spec).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(r, 0.0);
    }

    #[test]
    fn budget_is_enforced() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t = DynamicsParams::random(4, 4, 1.5, &mut rng);
        let spec = MdpSpec::new(4, 6, InitialState::Point { state: vec![0.0; 4] }, Reward::Constant { value: 1.0 }, 0.5).unwrap();
        assert!(matches!(
            telescoping_check(&t, &t, &PolicyParams::zeros(4), &spec),
            Err(ViolinError::BudgetExceeded { .. })
        ));
    }
}
