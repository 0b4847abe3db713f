//! Online learner invariants: simplex preservation, loss ranges,
//! realizability, the Hedge regret bound and cover radius.

use proptest::prelude::*;
use violin_core::bandit::{supervise, FiniteDiffConfig, SupervisionMode};
use violin_core::hard::random_unit;
use violin_core::harness::instance::random_two_layer;
use violin_core::learner::{
    bandit_loss, build_sparse_cover, exp_weights_update, ftl_update, hedge_rate, loss_bound, online_regret,
    record_losses, ClipConstants, HypothesisSet, LearnerKind, OnlineLearner, PosteriorWeights, SupervisionRecord,
    DEFAULT_COVER_BUDGET,
};
use violin_core::linalg::{dist, scale};
use violin_core::model::{Family, ModelParams, RewardQuery};
use violin_core::seeding::stream;

fn members(family: u8, d: usize, n: usize, seed: u64) -> Vec<ModelParams> {
    (0..n)
        .map(|k| {
            let mut rng = stream(seed, k as u64);
            match family % 3 {
                0 => ModelParams::linear(scale(&random_unit(d, &mut rng), 0.9)).unwrap(),
                1 => ModelParams::logistic(random_unit(d, &mut rng)).unwrap(),
                _ => random_two_layer(d, 3, &mut rng).unwrap(),
            }
        })
        .collect()
}

fn random_record(env: &ModelParams, seed: u64) -> SupervisionRecord {
    let d = env.dim();
    let mut rng = stream(seed, 1 << 40);
    let bound = env.family().action_bound();
    let a_t = scale(&random_unit(d, &mut rng), 0.7 * bound);
    let a_prev = scale(&random_unit(d, &mut rng), 0.4 * bound);
    let u = random_unit(d, &mut rng);
    let v = random_unit(d, &mut rng);
    let mut q = RewardQuery::default();
    supervise(env, &a_t, &a_prev, &u, &v, &FiniteDiffConfig::default(), SupervisionMode::Analytic, &mut q).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exponential_weights_stay_on_the_simplex(
        p in prop::collection::vec(0.01f64..1.0, 2..12),
        seed in any::<u64>(),
        lr in 0.0f64..5.0,
    ) {
        let total: f64 = p.iter().sum();
        let prior = PosteriorWeights::new(p.iter().map(|x| x / total).collect()).unwrap();
        let losses: Vec<f64> = members(0, 2, p.len(), seed).iter().map(|m| m.eta(&[0.3, -0.2]).unwrap().abs()).collect();
        let post = exp_weights_update(&prior, &losses, lr).unwrap();
        let w = post.as_slice();
        prop_assert!(w.iter().all(|x| *x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // ratio oracle: p_i'/p_j' = p_i/p_j · exp(−lr(l_i − l_j))
        let expect = prior.as_slice()[1] / prior.as_slice()[0] * (-lr * (losses[1] - losses[0])).exp();
        prop_assert!((w[1] / w[0] - expect).abs() <= 1e-9 * expect.max(1.0));
    }

    #[test]
    fn losses_are_bounded_and_truth_is_realizable(family in 0u8..3, seed in 0u64..10_000) {
        let set = members(family, 4, 6, seed);
        let env = &set[(seed % 6) as usize];
        let clips = ClipConstants::for_family(env.family());
        let rec = random_record(env, seed);
        let hs = HypothesisSet::explicit(set.clone()).unwrap();
        let losses = record_losses(&hs, &rec, &clips).unwrap();
        let v = loss_bound(env.family(), &clips);
        for l in &losses {
            prop_assert!(*l >= 0.0 && *l <= v, "loss {l} outside [0, {v}]");
        }
        prop_assert_eq!(bandit_loss(env, &rec, &clips).unwrap(), 0.0);
        prop_assert_eq!(losses[(seed % 6) as usize], 0.0);
    }

    #[test]
    fn hedge_regret_respects_the_standard_bound(
        n in 2usize..10, horizon in 10usize..200, seed in any::<u64>(),
    ) {
        let v = 3.0;
        let lr = hedge_rate(n, horizon, v);
        let mut learner = OnlineLearner::new(LearnerKind::Hedge, n, lr);
        let mut rng = stream(seed, 0);
        let mut rows = Vec::new();
        let mut expected = Vec::new();
        for _ in 0..horizon {
            let row: Vec<f64> = (0..n).map(|_| v * rand::Rng::random::<f64>(&mut rng)).collect();
            expected.push(learner.posterior().unwrap().expect(&row));
            learner.observe(&row).unwrap();
            rows.push(row);
        }
        let regret = online_regret(&rows, &expected).unwrap();
        let bound = v * ((horizon as f64) * (n as f64).ln() / 2.0).sqrt();
        prop_assert!(regret <= bound + 1e-9, "regret {regret} > {bound}");
    }

    #[test]
    fn cumulative_hedge_matches_chained_updates(n in 2usize..8, steps in 1usize..40, seed in any::<u64>()) {
        let lr = 0.7;
        let mut learner = OnlineLearner::new(LearnerKind::Hedge, n, lr);
        let mut chained = PosteriorWeights::uniform(n);
        let mut rng = stream(seed, 0);
        for _ in 0..steps {
            let row: Vec<f64> = (0..n).map(|_| rand::Rng::random::<f64>(&mut rng)).collect();
            learner.observe(&row).unwrap();
            chained = exp_weights_update(&chained, &row, lr).unwrap();
        }
        let direct = learner.posterior().unwrap();
        for (a, b) in direct.as_slice().iter().zip(chained.as_slice()) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn ftl_picks_the_lowest_cumulative_loss(family in 0u8..3, seed in 0u64..10_000) {
        let set = HypothesisSet::explicit(members(family, 3, 5, seed)).unwrap();
        let env = &set.members()[0];
        let clips = ClipConstants::for_family(set.family());
        let history: Vec<SupervisionRecord> = (0..4).map(|k| random_record(env, seed * 7 + k)).collect();
        let p = ftl_update(&history, &set, &clips).unwrap();
        let mut totals = vec![0.0; set.len()];
        for rec in &history {
            for (t, l) in totals.iter_mut().zip(record_losses(&set, rec, &clips).unwrap()) {
                *t += l;
            }
        }
        let best = totals.iter().cloned().fold(f64::INFINITY, f64::min);
        let chosen = p.argmax();
        prop_assert_eq!(p.as_slice()[chosen], 1.0);
        prop_assert_eq!(totals[chosen], best);
        prop_assert!(totals[..chosen].iter().all(|t| *t > best));
    }

    #[test]
    fn sparse_cover_reaches_every_sparse_unit_vector(seed in any::<u64>()) {
        let (d, s, res) = (6, 2, 0.3);
        let cover = build_sparse_cover(d, s, res, DEFAULT_COVER_BUDGET).unwrap();
        prop_assert_eq!(cover.family(), Family::Linear);
        let mut rng = stream(seed, 0);
        let dir = random_unit(s, &mut rng);
        let i = rand::Rng::random_range(&mut rng, 0..d);
        let j = (i + 1 + rand::Rng::random_range(&mut rng, 0..d - 1)) % d;
        let mut x = vec![0.0; d];
        x[i] = dir[0];
        x[j] = dir[1];
        let nearest = cover
            .members()
            .iter()
            .map(|m| dist(&m.anchor(), &x))
            .fold(f64::INFINITY, f64::min);
        prop_assert!(nearest <= res, "nearest member {nearest}");
    }
}

#[test]
fn gradient_term_clips_at_kappa1_squared() {
    let theta = ModelParams::linear(vec![0.0, 0.0]).unwrap();
    let clips = ClipConstants { kappa1: 0.7, kappa2: 5.0 };
    let mut rec = random_record(&theta, 1);
    let yh = violin_core::learner::predict(&theta, &rec).unwrap();
    rec.y = yh;
    rec.y[2] = yh[2] + 10.0 * clips.kappa1;
    assert!((bandit_loss(&theta, &rec, &clips).unwrap() - clips.kappa1 * clips.kappa1).abs() < 1e-12);
}

/// `a_t = a_prev = 0`, `u = v = e₁`: only the gradient term survives and
/// equals `min{κ₁², ⟨θ − θ⋆, e₁⟩²}`.
#[test]
fn linear_loss_matches_hand_expansion() {
    for seed in 0..20u64 {
        let mut rng = stream(seed, 0);
        let truth = scale(&random_unit(3, &mut rng), 0.9);
        let theta = scale(&random_unit(3, &mut rng), 0.5);
        let env = ModelParams::linear(truth.clone()).unwrap();
        let e1 = vec![1.0, 0.0, 0.0];
        let mut q = RewardQuery::default();
        let zero = vec![0.0; 3];
        let rec = supervise(&env, &zero, &zero, &e1, &e1, &FiniteDiffConfig::default(), SupervisionMode::Analytic, &mut q)
            .unwrap();
        let clips = ClipConstants::for_family(Family::Linear);
        let diff = theta[0] - truth[0];
        let expect = (diff * diff).min(clips.kappa1 * clips.kappa1);
        let got = bandit_loss(&ModelParams::linear(theta).unwrap(), &rec, &clips).unwrap();
        assert!((got - expect).abs() < 1e-15);
    }
}

/// The adversary puts loss `v` on the currently heaviest hypothesis.
#[test]
fn hedge_regret_bound_against_an_adaptive_adversary() {
    let (n, horizon, v) = (8, 1000, 2.0);
    let mut learner = OnlineLearner::new(LearnerKind::Hedge, n, hedge_rate(n, horizon, v));
    let mut rows = Vec::new();
    let mut expected = Vec::new();
    for _ in 0..horizon {
        let p = learner.posterior().unwrap();
        let mut row = vec![0.0; n];
        row[p.argmax()] = v;
        expected.push(p.expect(&row));
        learner.observe(&row).unwrap();
        rows.push(row);
    }
    let regret = online_regret(&rows, &expected).unwrap();
    assert!(regret <= v * (2.0 * horizon as f64 * (n as f64).ln()).sqrt());
    // cumulative losses agree with an independent accumulation
    for i in 0..n {
        let total: f64 = rows.iter().map(|r| r[i]).sum();
        assert_eq!(learner.cumulative()[i], total);
    }
}

#[test]
fn ftl_on_empty_and_fabricated_histories() {
    let h0 = ModelParams::logistic(vec![1.0, 0.0]).unwrap();
    let h1 = ModelParams::logistic(vec![0.0, 1.0]).unwrap();
    let set = HypothesisSet::explicit(vec![h0, h1.clone()]).unwrap();
    let clips = ClipConstants::for_family(Family::Logistic);
    assert_eq!(ftl_update(&[], &set, &clips).unwrap().as_slice(), &[1.0, 0.0]);
    let history: Vec<SupervisionRecord> = (0..5).map(|k| random_record(&h1, k)).collect();
    assert_eq!(ftl_update(&history, &set, &clips).unwrap().as_slice(), &[0.0, 1.0]);
}

#[test]
fn online_regret_reference_values() {
    let rows = vec![vec![0.0, 1.0]; 10];
    assert_eq!(online_regret(&rows, &[0.0; 10]).unwrap(), 0.0);
    let uniform = PosteriorWeights::uniform(2);
    let expected: Vec<f64> = rows.iter().map(|r| uniform.expect(r)).collect();
    assert!((online_regret(&rows, &expected).unwrap() - 5.0).abs() < 1e-12);
}

#[test]
fn one_sparse_covers() {
    let cover = build_sparse_cover(2, 1, 0.5, DEFAULT_COVER_BUDGET).unwrap();
    let anchors: Vec<Vec<f64>> = cover.members().iter().map(ModelParams::anchor).collect();
    for e in [[1.0, 0.0], [-1.0, 0.0], [0.0, 1.0], [0.0, -1.0]] {
        assert!(anchors.iter().any(|a| dist(a, &e) < 1e-12), "missing {e:?}");
    }
    let fine = build_sparse_cover(4, 1, 1e-3, DEFAULT_COVER_BUDGET).unwrap();
    let mut rng = stream(8, 0);
    for _ in 0..10_000 {
        let i = rand::Rng::random_range(&mut rng, 0..4);
        let mut x = vec![0.0; 4];
        x[i] = if rand::Rng::random::<bool>(&mut rng) { 1.0 } else { -1.0 };
        let nearest = fine.members().iter().map(|m| dist(&m.anchor(), &x)).fold(f64::INFINITY, f64::min);
        assert!(nearest <= 1e-3);
    }
}

#[test]
fn two_sparse_cover_size_is_bounded_by_great_circle_grids() {
    let delta = 0.2;
    let cover = build_sparse_cover(6, 2, delta, DEFAULT_COVER_BUDGET).unwrap();
    assert!(cover.len() as f64 <= 15.0 * (std::f64::consts::PI / delta + 1.0), "{} members", cover.len());
}
