//! Regret metrics against hand computations and a grid oracle, detector
//! monotonicity, and the experiment harness's artifact contract.

use proptest::prelude::*;
use std::path::Path;
use violin_core::harness::{run_experiment, summarize_csv, ExperimentConfig, CSV_COLUMNS};
use violin_core::linalg::dot;
use violin_core::metrics::{
    find_local_max_set, is_approx_local_max, local_regret, standard_regret, LocalMaxSet, StationaryThresholds,
};
use violin_core::model::{Family, ModelParams};

#[test]
fn local_regret_matches_hand_sums() {
    let set = LocalMaxSet {
        members: vec![vec![0.0]],
        worst_value: 0.5,
        exact: true,
    };
    let r = local_regret(&[0.2, 0.7, 0.5, 0.0], &set);
    // gaps 0.3, -0.2, 0, 0.5
    assert!((r.signed - 0.6).abs() < 1e-15);
    assert!((r.clipped - 0.8).abs() < 1e-15);
    let expect = [0.3, 0.1, 0.1, 0.6];
    for (x, y) in r.signed_prefix.iter().zip(expect) {
        assert!((x - y).abs() < 1e-15);
    }
}

#[test]
fn standard_regret_of_the_origin_is_half_squared_norm_per_step() {
    let theta = vec![0.3, -0.4, 0.5];
    let env = ModelParams::linear(theta.clone()).unwrap();
    let t = 37;
    let rewards = vec![env.eta(&[0.0; 3]).unwrap(); t];
    let r = standard_regret(&rewards, &env).unwrap();
    assert!((r - t as f64 * 0.5 * dot(&theta, &theta)).abs() < 1e-12);
}

#[test]
fn playing_the_optimum_has_zero_standard_regret() {
    for env in [ModelParams::linear(vec![0.3, -0.4, 0.5]).unwrap(), ModelParams::logistic(vec![0.0, 0.6, 0.8]).unwrap()] {
        let opt = env.known_optimum().unwrap();
        let rewards = vec![env.eta(&opt).unwrap(); 25];
        assert!(standard_regret(&rewards, &env).unwrap().abs() < 1e-12);
    }
}

#[test]
fn bandit_ledger_regret_matches_a_direct_sum() {
    use violin_core::bandit::{run_violin, SupervisionMode, ViolinConfig};
    use violin_core::learner::{HypothesisSet, LearnerKind};
    let set = HypothesisSet::explicit(vec![
        ModelParams::linear(vec![0.5, 0.1]).unwrap(),
        ModelParams::linear(vec![-0.2, 0.6]).unwrap(),
        ModelParams::linear(vec![0.1, -0.7]).unwrap(),
    ])
    .unwrap();
    let env = &set.members()[1];
    let led = run_violin(env, &set, &ViolinConfig::new(30, LearnerKind::Hedge, SupervisionMode::Analytic, 2)).unwrap();
    let rewards: Vec<f64> = led.steps.iter().map(|s| s.real_reward).collect();
    // best value of ⟨θ, a⟩ − ½‖a‖² over ‖a‖ ≤ 2 is at a = θ
    let best = 0.5 * (0.2f64 * 0.2 + 0.6 * 0.6);
    let direct: f64 = led.actions().map(|a| best - (dot(&[-0.2, 0.6], a) - 0.5 * dot(a, a))).sum();
    assert!((standard_regret(&rewards, env).unwrap() - direct).abs() < 1e-12);
}

/// Minimum reward over the grid points of the action disc that pass the
/// detector.
fn grid_worst(env: &ModelParams, th: &StationaryThresholds, step: f64) -> f64 {
    let bound = env.family().action_bound();
    let n = (bound / step).ceil() as i64;
    let mut worst = f64::INFINITY;
    for i in -n..=n {
        for j in -n..=n {
            let a = [i as f64 * step, j as f64 * step];
            if dot(&a, &a) <= bound * bound && is_approx_local_max(env, &a, th).unwrap() {
                worst = worst.min(env.eta(&a).unwrap());
            }
        }
    }
    worst
}

#[test]
fn logistic_local_max_search_agrees_with_a_grid() {
    let env = ModelParams::logistic(vec![0.6, 0.8]).unwrap();
    let th = StationaryThresholds::default_for(Family::Logistic);
    let found = find_local_max_set(&env, &th, 64, 1).unwrap();
    let grid = grid_worst(&env, &th, 0.002);
    assert!(grid.is_finite());
    assert!((found.worst_value - grid).abs() < 1e-3, "search {} vs grid {grid}", found.worst_value);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn detector_is_monotone_in_its_thresholds(
        a in prop::collection::vec(-1.0f64..1.0, 3),
        eg in 0.0f64..0.5, eh in -0.5f64..0.5, dg in 0.0f64..0.5, dh in 0.0f64..0.5,
        logistic in any::<bool>(),
    ) {
        let env = if logistic {
            ModelParams::logistic(vec![0.0, 0.6, 0.8]).unwrap()
        } else {
            ModelParams::linear(vec![0.2, 0.1, -0.4]).unwrap()
        };
        let tight = StationaryThresholds::new(eg, eh);
        let loose = StationaryThresholds::new(eg + dg, eh + dh);
        if is_approx_local_max(&env, &a, &tight).unwrap() {
            prop_assert!(is_approx_local_max(&env, &a, &loose).unwrap());
        }
    }

    #[test]
    fn linear_worst_value_decreases_as_the_set_grows(eg in 0.0f64..0.5, dg in 0.0f64..0.5) {
        let env = ModelParams::linear(vec![0.5, -0.5]).unwrap();
        let small = find_local_max_set(&env, &StationaryThresholds::new(eg, -0.5), 1, 0).unwrap();
        let large = find_local_max_set(&env, &StationaryThresholds::new(eg + dg, -0.5), 1, 0).unwrap();
        prop_assert!(large.worst_value <= small.worst_value);
    }
}

fn config(dir: &Path, family: &str, extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml_str(&format!(
        "family = \"{family}\"\ndim = 3\nhypotheses = 5\nhorizon = 10\nlearner = \"hedge\"\nmode = \"finite-diff\"\n\
         seeds = [4, 2]\noutput_dir = \"{}\"\nthreads = 1\n{extra}",
        dir.display()
    ))
    .unwrap()
}

#[test]
fn experiment_writes_the_artifact_set() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "logistic", "");
    let art = run_experiment(&cfg).unwrap();
    let mut names: Vec<String> = art
        .files
        .iter()
        .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["aggregate.csv", "config.toml", "manifest.txt", "seed-2.csv", "seed-4.csv"]);

    let aggregate = std::fs::read_to_string(tmp.path().join("aggregate.csv")).unwrap();
    assert_eq!(aggregate.lines().next().unwrap(), CSV_COLUMNS.join(","));
    assert_eq!(aggregate.lines().count(), 1 + 2 * 10);
    let summary = summarize_csv(&aggregate).unwrap();
    assert_eq!(summary.iter().map(|s| s.seed).collect::<Vec<_>>(), [2, 4]);
    assert!(summary.iter().all(|s| s.steps == 10 && s.queries == 50));

    let manifest = std::fs::read_to_string(tmp.path().join("manifest.txt")).unwrap();
    assert!(manifest.contains("family = logistic"));
    assert!(manifest.contains(art.aggregate_sha256.as_deref().unwrap()));

    let snapshot = std::fs::read_to_string(tmp.path().join("config.toml")).unwrap();
    assert_eq!(ExperimentConfig::from_toml_str(&snapshot).unwrap(), cfg);
}

#[test]
fn reruns_are_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let a = run_experiment(&config(first.path(), "two-layer", "")).unwrap();
    let b = run_experiment(&config(second.path(), "two-layer", "")).unwrap();
    assert_eq!(a.aggregate_sha256, b.aggregate_sha256);
    for name in ["aggregate.csv", "seed-2.csv", "seed-4.csv"] {
        assert_eq!(
            std::fs::read(first.path().join(name)).unwrap(),
            std::fs::read(second.path().join(name)).unwrap()
        );
    }
}

#[test]
fn dry_run_writes_only_config_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let art = run_experiment(&config(tmp.path(), "linear", "dry_run = true")).unwrap();
    assert_eq!(art.files.len(), 2);
    assert!(art.aggregate_sha256.is_none());
    assert_eq!(std::fs::read_dir(tmp.path()).unwrap().count(), 2);
}

#[test]
fn sparse_linear_runs_over_its_cover() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "sparse-linear", "sparsity = 1\nresolution = 0.5");
    let art = run_experiment(&cfg).unwrap();
    let aggregate = std::fs::read_to_string(tmp.path().join("aggregate.csv")).unwrap();
    // linear rewards have a closed-form optimum, so standard regret is finite
    let last = aggregate.lines().last().unwrap();
    assert!(!last.ends_with("NaN"));
    assert_eq!(art.files.len(), 5);
}

#[test]
fn two_layer_standard_regret_is_not_available() {
    let tmp = tempfile::tempdir().unwrap();
    run_experiment(&config(tmp.path(), "two-layer", "")).unwrap();
    let aggregate = std::fs::read_to_string(tmp.path().join("aggregate.csv")).unwrap();
    assert!(aggregate.lines().skip(1).all(|l| l.ends_with("NaN")));
}

#[test]
fn invalid_configs_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = format!(
        "family = \"linear\"\ndim = 0\nhypotheses = 5\nhorizon = 10\nlearner = \"hedge\"\nmode = \"analytic\"\n\
         seeds = [1]\noutput_dir = \"{}\"\n",
        tmp.path().display()
    );
    assert!(ExperimentConfig::from_toml_str(&bad).is_err());
    assert!(ExperimentConfig::from_toml_str(&format!("{bad}\nunknown = 1")).is_err());
}
