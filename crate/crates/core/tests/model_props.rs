//! Reward model derivatives against finite differences, smoothness bounds
//! and symmetry properties.

use proptest::prelude::*;
use violin_core::harness::instance::random_two_layer;
use violin_core::linalg::{dot, lambda_max, norm, scale, sym_spectral_norm, Matrix};
use violin_core::model::{smoothness, ModelParams};
use violin_core::seeding::stream;

const FD_STEP: f64 = 1e-5;

fn vec_in_ball(d: usize, radius: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, d).prop_map(move |v| {
        let n = norm(&v);
        if n > 1.0 {
            scale(&v, 0.999 * radius / n)
        } else {
            scale(&v, 0.999 * radius)
        }
    })
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = norm(v);
    if n < 1e-9 {
        let mut e = vec![0.0; v.len()];
        e[0] = 1.0;
        e
    } else {
        scale(v, 1.0 / n)
    }
}

fn smooth_model(kind: u8, theta: Vec<f64>, seed: u64) -> ModelParams {
    match kind % 3 {
        0 => ModelParams::linear(theta).unwrap(),
        1 => ModelParams::logistic(unit(&theta)).unwrap(),
        _ => random_two_layer(theta.len(), 4, &mut stream(seed, 0)).unwrap(),
    }
}

fn fd_grad(m: &ModelParams, a: &[f64]) -> Vec<f64> {
    (0..a.len())
        .map(|i| {
            let mut p = a.to_vec();
            let mut q = a.to_vec();
            p[i] += FD_STEP;
            q[i] -= FD_STEP;
            (m.eta(&p).unwrap() - m.eta(&q).unwrap()) / (2.0 * FD_STEP)
        })
        .collect()
}

fn fd_hess(m: &ModelParams, a: &[f64]) -> Matrix {
    let d = a.len();
    let mut h = Matrix::zeros(d, d);
    for j in 0..d {
        let mut p = a.to_vec();
        let mut q = a.to_vec();
        p[j] += FD_STEP;
        q[j] -= FD_STEP;
        let gp = m.grad_a(&p).unwrap();
        let gq = m.grad_a(&q).unwrap();
        for i in 0..d {
            h[(i, j)] = (gp[i] - gq[i]) / (2.0 * FD_STEP);
        }
    }
    h
}

/// Householder reflection `I − 2wwᵀ/‖w‖²`.
fn reflect(w: &[f64], x: &[f64]) -> Vec<f64> {
    let c = 2.0 * dot(w, x) / dot(w, w);
    x.iter().zip(w).map(|(xi, wi)| xi - c * wi).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gradient_matches_central_differences(
        kind in 0u8..3, seed in 0u64..1000,
        theta in vec_in_ball(4, 1.0), a in vec_in_ball(4, 2.0),
    ) {
        let m = smooth_model(kind, theta, seed);
        let g = m.grad_a(&a).unwrap();
        for (x, y) in g.iter().zip(fd_grad(&m, &a)) {
            prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn hessian_matches_differenced_gradient(
        kind in 0u8..3, seed in 0u64..1000,
        theta in vec_in_ball(4, 1.0), a in vec_in_ball(4, 2.0),
    ) {
        let m = smooth_model(kind, theta, seed);
        let h = m.hess_a(&a).unwrap();
        let f = fd_hess(&m, &a);
        prop_assert!(h.asymmetry() < 1e-12);
        for (x, y) in h.as_slice().iter().zip(f.as_slice()) {
            prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn directional_forms_match_full_derivatives(
        kind in 0u8..3, seed in 0u64..1000,
        theta in vec_in_ball(3, 1.0), a in vec_in_ball(3, 2.0),
        u in vec_in_ball(3, 1.0), v in vec_in_ball(3, 1.0),
    ) {
        let m = smooth_model(kind, theta, seed);
        let g = m.grad_a(&a).unwrap();
        let h = m.hess_a(&a).unwrap();
        prop_assert!((m.grad_dot(&a, &u).unwrap() - dot(&g, &u)).abs() < 1e-12);
        prop_assert!((m.hess_form(&a, &u, &v).unwrap() - h.bilinear(&u, &v)).abs() < 1e-12);
    }

    #[test]
    fn derivatives_respect_smoothness_constants(
        kind in 0u8..3, seed in 0u64..1000,
        theta in vec_in_ball(5, 1.0), a in vec_in_ball(5, 2.0),
    ) {
        let m = smooth_model(kind, theta, seed);
        let s = smoothness(m.family());
        prop_assert!(norm(&m.grad_a(&a).unwrap()) <= s.zeta_g + 1e-12);
        prop_assert!(sym_spectral_norm(&m.hess_a(&a).unwrap()).unwrap() <= s.zeta_h + 1e-9);
    }

    #[test]
    fn lambda_max_dominates_every_rayleigh_quotient(
        kind in 0u8..3, seed in 0u64..1000,
        theta in vec_in_ball(4, 1.0), a in vec_in_ball(4, 2.0), v in vec_in_ball(4, 1.0),
    ) {
        prop_assume!(norm(&v) > 1e-6);
        let m = smooth_model(kind, theta, seed);
        let h = m.hess_a(&a).unwrap();
        let lm = lambda_max(&h).unwrap();
        prop_assert!(lm * dot(&v, &v) >= h.bilinear(&v, &v) - 1e-12);
    }

    #[test]
    fn linear_and_logistic_are_rotation_invariant(
        logistic in any::<bool>(),
        theta in vec_in_ball(4, 1.0), a in vec_in_ball(4, 2.0),
        w in vec_in_ball(4, 1.0),
    ) {
        prop_assume!(norm(&w) > 1e-3);
        let theta = if logistic { unit(&theta) } else { theta };
        let build = |t: Vec<f64>| if logistic { ModelParams::logistic(t) } else { ModelParams::linear(t) }.unwrap();
        let base = build(theta.clone()).eta(&a).unwrap();
        let rotated = build(reflect(&w, &theta)).eta(&reflect(&w, &a)).unwrap();
        prop_assert!((base - rotated).abs() < 1e-12);
    }

    #[test]
    fn linear_optimum_value_is_half_squared_norm(theta in vec_in_ball(6, 1.0)) {
        let m = ModelParams::linear(theta.clone()).unwrap();
        let opt = m.known_optimum().unwrap();
        prop_assert!((m.eta(&opt).unwrap() - 0.5 * dot(&theta, &theta)).abs() < 1e-15);
    }
}

#[test]
fn two_layer_gradient_meets_central_difference_error_order() {
    let alpha = 1e-4;
    for seed in 0..50u64 {
        let mut rng = stream(seed, 1);
        let m = random_two_layer(4, 4, &mut rng).unwrap();
        let a = scale(&random_dir(4, seed), 1.5);
        let g = m.grad_a(&a).unwrap();
        for i in 0..4 {
            let mut p = a.clone();
            let mut q = a.clone();
            p[i] += alpha;
            q[i] -= alpha;
            let fd = (m.eta(&p).unwrap() - m.eta(&q).unwrap()) / (2.0 * alpha);
            assert!((g[i] - fd).abs() <= 10.0 * alpha * alpha, "seed {seed}: {} vs {fd}", g[i]);
        }
    }
}

fn random_dir(d: usize, seed: u64) -> Vec<f64> {
    use rand::Rng;
    let mut rng = stream(seed, 2);
    unit(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>())
}

/// Largest eigenvalue by power iteration on `H + cI`, `c = ‖H‖_F`, so the
/// spectrum is nonnegative and the top of it is `λ_max + c`.
fn power_lambda_max(h: &Matrix, iters: usize) -> f64 {
    let n = h.rows();
    let c = h.frobenius();
    let mut x = random_dir(n, 99);
    for _ in 0..iters {
        let mut y = h.matvec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += c * xi;
        }
        x = scale(&y, 1.0 / norm(&y));
    }
    h.bilinear(&x, &x)
}

#[test]
fn lambda_max_agrees_with_power_iteration() {
    use rand::Rng;
    for seed in 0..20u64 {
        let mut rng = stream(seed, 3);
        let mut h = Matrix::zeros(8, 8);
        for i in 0..8 {
            for j in 0..=i {
                let x = rng.random_range(-1.0..1.0);
                h[(i, j)] = x;
                h[(j, i)] = x;
            }
        }
        let exact = lambda_max(&h).unwrap();
        let power = power_lambda_max(&h, 10_000);
        assert!((exact - power).abs() < 1e-8, "seed {seed}: {exact} vs {power}");
    }
}

#[test]
fn logistic_hessian_norm_stays_below_its_constant() {
    use rand::Rng;
    let zeta_h = smoothness(violin_core::model::Family::Logistic).zeta_h;
    let mut rng = stream(5, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..100_000 {
        let d = rng.random_range(1..6);
        let theta = unit(&(0..d).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>());
        let a: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a = if norm(&a) > 1.0 { scale(&a, 2.0 * rng.random::<f64>() / norm(&a)) } else { scale(&a, 2.0) };
        let h = ModelParams::logistic(theta).unwrap().hess_a(&a).unwrap();
        worst = worst.max(sym_spectral_norm(&h).unwrap());
    }
    assert!(worst <= zeta_h, "empirical {worst} > {zeta_h}");
}

#[test]
fn third_derivative_constants() {
    use violin_core::model::Family;
    assert_eq!(smoothness(Family::Linear).zeta_3rd, 0.0);
    assert!(smoothness(Family::TwoLayer).zeta_3rd <= 1.0);
}
