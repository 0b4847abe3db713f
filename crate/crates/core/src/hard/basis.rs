//! Linear bandit over the basis hypotheses `{e_1, …, e_d}` with standard
//! Gaussian reward noise, and a best-arm identification routine against it.

use crate::error::{check_dim, Result, ViolinError};
use crate::seeding::stream;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Environment returning `⟨e_truth, a⟩ + N(0, 1)` (no noise when `noisy`
/// is false).
#[derive(Debug, Clone)]
pub struct StochasticBasis {
    d: usize,
    truth: usize,
    noisy: bool,
    rng: ChaCha8Rng,
    queries: usize,
}

impl StochasticBasis {
    pub fn new(d: usize, truth: usize, noisy: bool, seed: u64) -> Result<Self> {
        if d < 2 {
            return Err(ViolinError::InvalidParams("basis instance needs d ≥ 2".into()));
        }
        if truth >= d {
            return Err(ViolinError::InvalidParams(format!("truth index {truth} out of range for d = {d}")));
        }
        Ok(Self {
            d,
            truth,
            noisy,
            rng: stream(seed, 0),
            queries: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn truth(&self) -> usize {
        self.truth
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn query(&mut self, a: &[f64]) -> Result<f64> {
        check_dim(self.d, a.len())?;
        self.queries += 1;
        let noise = if self.noisy {
            self.rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        Ok(a[self.truth] + noise)
    }
}

/// Identification outcome of one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Identification {
    pub guess: usize,
    pub truth: usize,
}

/// Explore-then-commit with `budget` queries: arms `e_0, e_1, …` are probed
/// in a random order, cycling if the budget exceeds `d`. The guess is the
/// probed arm with the highest mean reward if that mean exceeds ½, and a
/// uniformly random unprobed arm otherwise.
pub fn identify_best_arm<R: Rng>(env: &mut StochasticBasis, budget: usize, rng: &mut R) -> Result<usize> {
    let d = env.dim();
    let mut order: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        order.swap(i, rng.random_range(0..=i));
    }
    let mut sums = vec![0.0; d];
    let mut counts = vec![0usize; d];
    for t in 0..budget {
        let arm = order[t % d];
        let mut a = vec![0.0; d];
        a[arm] = 1.0;
        sums[arm] += env.query(&a)?;
        counts[arm] += 1;
    }
    let best = (0..d)
        .filter(|&i| counts[i] > 0)
        .map(|i| (i, sums[i] / counts[i] as f64))
        .max_by(|x, y| x.1.total_cmp(&y.1));
    let unprobed: Vec<usize> = (0..d).filter(|&i| counts[i] == 0).collect();
    Ok(match best {
        Some((i, m)) if m > 0.5 || unprobed.is_empty() => i,
        _ if !unprobed.is_empty() => unprobed[rng.random_range(0..unprobed.len())],
        _ => rng.random_range(0..d),
    })
}

/// Success rate of [`identify_best_arm`] over `trials` independent
/// instances with a uniformly drawn truth.
pub fn identification_success(d: usize, budget: usize, trials: usize, noisy: bool, seed: u64) -> Result<f64> {
    if trials == 0 {
        return Err(ViolinError::InvalidParams("need at least one trial".into()));
    }
    let mut wins = 0usize;
    for k in 0..trials {
        let mut rng = stream(seed, 2 * k as u64 + 1);
        let truth = rng.random_range(0..d);
        let mut env = StochasticBasis::new(d, truth, noisy, crate::seeding::derive_seed(seed, 2 * k as u64 + 2))?;
        if identify_best_arm(&mut env, budget, &mut rng)? == truth {
            wins += 1;
        }
    }
    Ok(wins as f64 / trials as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_basis_reward() {
        let mut env = StochasticBasis::new(4, 2, false, 0).unwrap();
        assert_eq!(env.query(&[0.0, 0.0, 1.0, 0.0]).unwrap(), 1.0);
        let u = vec![0.5; 4];
        assert_eq!(env.query(&u).unwrap(), 0.5);
    }

    #[test]
    fn noiseless_full_budget_always_identifies() {
        assert_eq!(identification_success(8, 8, 50, false, 3).unwrap(), 1.0);
    }
}
