//! Quick property checks runnable from the command line.

use crate::baselines::{query_bound, sparse_binary_search, RawLinearOracle};
use crate::error::{Result, ViolinError};
use crate::hard::{build_packing, eluder_sequence_relu, eluder_sequence_sparse, relu_needle_family, verify_eluder};
use crate::learner::clipped_bilinear_moment;
use crate::linalg::Matrix;
use crate::rl::{random_dynamics_class, telescoping_check, InitialState, MdpSpec, PolicyParams, Reward};
use crate::seeding::stream;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const CHECKS: [&str; 5] = ["packing", "eluder", "sparse-search", "telescoping", "clipped-moment"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn outcome(name: &str, passed: bool, detail: String) -> CheckOutcome {
    CheckOutcome {
        name: name.into(),
        passed,
        detail,
    }
}

/// Runs one named check, or all of them for `"all"`.
pub fn run_checks(selector: &str, seed: u64) -> Result<Vec<CheckOutcome>> {
    let names: Vec<&str> = if selector == "all" {
        CHECKS.to_vec()
    } else if CHECKS.contains(&selector) {
        vec![selector]
    } else {
        return Err(ViolinError::Config(format!(
            "unknown check `{selector}`; expected one of all, {}",
            CHECKS.join(", ")
        )));
    };
    names.into_iter().map(|n| run_one(n, seed)).collect()
}

fn run_one(name: &str, seed: u64) -> Result<CheckOutcome> {
    match name {
        "packing" => {
            let p = build_packing(6, 0.8, seed, 5_000)?;
            let fam = relu_needle_family(&p, crate::hard::needle_width_limit(0.8))?;
            let mut rng = stream(seed, 1);
            let mut worst = 0;
            for _ in 0..2_000 {
                let a = crate::hard::random_unit(6, &mut rng);
                let r: f64 = rng.random();
                let a: Vec<f64> = a.into_iter().map(|x| x * r.powf(1.0 / 6.0)).collect();
                let firing = fam.iter().filter(|m| m.eta(&a).map(|v| v > 0.0).unwrap_or(true)).count();
                worst = worst.max(firing);
            }
            Ok(outcome(
                name,
                p.audit().is_ok() && worst <= 1,
                format!("{} points, min distance {:.4}, max needles firing {worst}", p.len(), p.min_distance()),
            ))
        }
        "eluder" => {
            let s = eluder_sequence_sparse(8)?;
            let p = build_packing(3, 1.0, seed, 1_000)?;
            let r = eluder_sequence_relu(&p, 0.4)?;
            let ok = verify_eluder(&s).is_ok() && verify_eluder(&r).is_ok();
            Ok(outcome(name, ok, format!("sparse length {}, relu length {}", s.len(), r.len())))
        }
        "sparse-search" => {
            let (d, s) = (64, 2);
            let mut worst = 0;
            let mut ok = true;
            for k in 0..100u64 {
                let mut rng = stream(seed, k);
                let mut theta = vec![0.0; d];
                let mut support = Vec::new();
                while support.len() < s {
                    let i = rng.random_range(0..d);
                    if !support.contains(&i) {
                        support.push(i);
                        theta[i] = rng.random_range(0.1..1.0);
                    }
                }
                support.sort_unstable();
                let res = sparse_binary_search(&mut RawLinearOracle::new(theta))?;
                ok &= res.support == support;
                worst = worst.max(res.queries);
            }
            let bound = query_bound(d, s);
            Ok(outcome(name, ok && worst <= bound, format!("max queries {worst}, bound {bound}")))
        }
        "telescoping" => {
            let mut worst: f64 = 0.0;
            for k in 0..20u64 {
                let models = random_dynamics_class(2, 6, 2, 1.5, crate::seeding::derive_seed(seed, k));
                let mut rng = stream(seed, 1000 + k);
                let mut m = Matrix::zeros(2, 2);
                m.as_mut_slice().iter_mut().for_each(|x| *x = 0.6 * rng.sample::<f64, _>(StandardNormal));
                let psi = PolicyParams::projected(m)?;
                let spec = MdpSpec::new(
                    2,
                    3,
                    InitialState::Point { state: vec![0.3, -0.2] },
                    Reward::Goal { goal: vec![0.5, 0.5], action_cost: 0.1 },
                    0.5,
                )?;
                let (lhs, rhs) = telescoping_check(&models[1], &models[0], &psi, &spec)?;
                worst = worst.max((lhs - rhs).abs());
            }
            Ok(outcome(name, worst <= 1e-10, format!("max |lhs − rhs| = {worst:.3e}")))
        }
        "clipped-moment" => {
            let kappa = 640.0 * 2f64.sqrt();
            let mut ok = true;
            let mut detail = Vec::new();
            for (k, target) in [0.1, 1.0, 10.0].into_iter().enumerate() {
                let h = random_symmetric(5, target, &mut stream(seed, k as u64));
                let est = clipped_bilinear_moment(&h, kappa, 200_000, crate::seeding::derive_seed(seed, k as u64))?;
                let rhs = 0.5 * target.powi(2).min(1.0) * (1.0 - 3.0 * est.se / est.mean);
                ok &= est.mean >= rhs;
                detail.push(format!("‖H‖_F={target}: {:.4} ≥ {:.4}", est.mean, rhs));
            }
            Ok(outcome(name, ok, detail.join("; ")))
        }
        _ => unreachable!("names are filtered against CHECKS"),
    }
}

/// Symmetric Gaussian matrix rescaled to Frobenius norm `frob`.
pub fn random_symmetric<R: Rng>(d: usize, frob: f64, rng: &mut R) -> Matrix {
    let mut m = Matrix::zeros(d, d);
    for i in 0..d {
        for j in i..d {
            let x: f64 = rng.sample(StandardNormal);
            m.as_mut_slice()[i * d + j] = x;
            m.as_mut_slice()[j * d + i] = x;
        }
    }
    let f = m.frobenius();
    m.scaled(frob / f)
}
