use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rbo_core::estimators::{
    antithetic_mc, build_rbo_problem, forward_fd_mc, rbo_gradient, rbo_gradient_noisy, ridge_equivalence_error,
    vanilla_mc,
};
use rbo_core::objectives::{make_concave_quadratic, make_linear, objective_by_name};
use rbo_core::regression::solve;
use rbo_core::rng::{stream_rng, StreamTag};
use rbo_core::sampling::{sample_gaussian, sample_orthogonal};
use rbo_core::{Constants, CorruptionMode, DomainSpec, NoiseModel, Objective, PerturbationEnsemble, RegressionSpec};

fn custom(dim: usize, eval: impl Fn(&DVector<f64>) -> f64 + Send + Sync + 'static) -> Objective {
    Objective::new("custom", dim, Arc::new(eval), None, DomainSpec::Unbounded, Constants::UNCERTIFIED, None)
}

#[test]
fn vanilla_linear_within_standard_errors() {
    let f = make_linear(DVector::from_vec(vec![1.0, 0.0]), DomainSpec::Unbounded).unwrap();
    let (k, sigma) = (100_000, 0.1);
    let e = sample_gaussian(k, 2, 17).unwrap();
    let theta = DVector::zeros(2);
    let est = vanilla_mc(&f, &theta, sigma, &e).unwrap().grad;
    for j in 0..2 {
        let terms: Vec<f64> = (0..k).map(|i| f.eval(&(e.direction(i) * sigma)) * e.rows[(i, j)] / sigma).collect();
        let mean = terms.iter().sum::<f64>() / k as f64;
        let se = (terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (k - 1) as f64 / k as f64).sqrt();
        assert!((est[j] - f.gradient(&theta).unwrap()[j]).abs() < 3.0 * se);
    }
}

#[test]
fn degenerate_and_constant_cases() {
    let zero = PerturbationEnsemble::from_rows(DMatrix::zeros(1, 3));
    let f = custom(3, |x| x.sum() + 1.0);
    assert_eq!(vanilla_mc(&f, &DVector::zeros(3), 0.1, &zero).unwrap().grad, DVector::zeros(3));

    let c = custom(3, |_| 4.0);
    let e = sample_gaussian(7, 3, 2).unwrap();
    let theta = DVector::from_element(3, 0.5);
    let v = vanilla_mc(&c, &theta, 0.2, &e).unwrap().grad;
    let expected = e.rows.row_sum().transpose() * (4.0 / 0.2 / 7.0);
    assert!((v - expected).norm() < 1e-12);
    assert_eq!(forward_fd_mc(&c, &theta, 0.2, &e).unwrap().grad, DVector::zeros(3));
    assert_eq!(antithetic_mc(&c, &theta, 0.2, &e).unwrap().grad, DVector::zeros(3));
}

#[test]
fn smoothed_gradient_unbiasedness() {
    // F(θ) = sin(aᵀθ) has smoothed gradient a cos(aᵀθ) exp(-σ²|a|²/2).
    let a = DVector::from_vec(vec![0.8, -0.5, 0.3]);
    let a2 = a.clone();
    let f = custom(3, move |x| a2.dot(x).sin());
    let theta = DVector::from_vec(vec![0.2, 0.1, -0.4]);
    let sigma = 0.3;
    let smoothed = &a * (a.dot(&theta).cos() * (-0.5 * sigma * sigma * a.norm_squared()).exp());

    let reps = 200;
    let estimates: Vec<DVector<f64>> = (0..reps)
        .map(|r| vanilla_mc(&f, &theta, sigma, &sample_gaussian(200, 3, 1000 + r).unwrap()).unwrap().grad)
        .collect();
    let mean = estimates.iter().fold(DVector::zeros(3), |acc, g| acc + g) / reps as f64;
    for j in 0..3 {
        let var = estimates.iter().map(|g| (g[j] - mean[j]).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean[j] - smoothed[j]).abs() < 4.0 * se, "coordinate {j}");
    }

    // Independent 10^6-sample estimate of the smoothed gradient agrees with the closed form.
    let mut rng = stream_rng(4, StreamTag::Fixture, 0);
    let n = 1_000_000;
    let mut acc = DVector::zeros(3);
    for _ in 0..n {
        let g = DVector::from_fn(3, |_, _| rng.sample::<f64, _>(StandardNormal));
        acc += &g * (a.dot(&(&theta + &g * sigma)).sin() / sigma);
    }
    assert!((acc / n as f64 - &smoothed).norm() < 0.02);
}

#[test]
fn forward_fd_linear_rows_exact() {
    let a = DVector::from_vec(vec![2.0, -1.0, 0.5, 3.0]);
    let f = make_linear(a.clone(), DomainSpec::Unbounded).unwrap();
    let e = sample_gaussian(9, 4, 8).unwrap();
    let sigma = 0.25;
    let theta = DVector::from_element(4, 1.0);
    let est = forward_fd_mc(&f, &theta, sigma, &e).unwrap().grad;
    let expected = e.rows.transpose() * (&e.rows * &a) / 9.0;
    assert!((est - expected).norm() < 1e-12);
}

#[test]
fn forward_fd_bias_is_linear_in_sigma() {
    let f = objective_by_name("quadratic-d8").unwrap();
    let theta = DVector::from_element(8, 0.1);
    let g = f.gradient(&theta).unwrap();
    let e = sample_orthogonal(8, 8, 3).unwrap();
    let sigmas = [1e-1, 1e-2, 1e-3, 1e-4];
    let errors: Vec<f64> =
        sigmas.iter().map(|&s| (forward_fd_mc(&f, &theta, s, &e).unwrap().grad - &g).norm()).collect();
    for w in errors.windows(2).zip(sigmas.windows(2)) {
        let slope = (w.0[0] / w.0[1]).log10() / (w.1[0] / w.1[1]).log10();
        assert!((slope - 1.0).abs() < 0.05, "slope {slope}");
    }
}

#[test]
fn antithetic_quadratic_exact_and_cubic_order() {
    let f = objective_by_name("quadratic-d5").unwrap();
    let theta = DVector::from_element(5, -0.2);
    let e = sample_gaussian(6, 5, 1).unwrap();
    let est = antithetic_mc(&f, &theta, 0.3, &e).unwrap().grad;
    let expected = e.rows.transpose() * (&e.rows * f.gradient(&theta).unwrap()) / 6.0;
    assert!((est - expected).norm() < 1e-12);

    let cube = custom(1, |x| x[0].powi(3));
    let one = PerturbationEnsemble::from_rows(DMatrix::from_element(1, 1, 1.0));
    let sigma = 0.1;
    let at0 = DVector::zeros(1);
    assert!((antithetic_mc(&cube, &at0, sigma, &one).unwrap().grad[0] - 0.01).abs() < 1e-12);
    assert!((forward_fd_mc(&cube, &at0, sigma, &one).unwrap().grad[0] - 0.01).abs() < 1e-12);
    let at1 = DVector::from_element(1, 1.0);
    let anti_err = (antithetic_mc(&cube, &at1, sigma, &one).unwrap().grad[0] - 3.0).abs();
    let fwd_err = (forward_fd_mc(&cube, &at1, sigma, &one).unwrap().grad[0] - 3.0).abs();
    assert!((anti_err - sigma * sigma).abs() < 1e-12);
    assert!((fwd_err - (3.0 * sigma + sigma * sigma)).abs() < 1e-12);
}

#[test]
fn problem_construction() {
    let p = build_rbo_problem(
        1.0,
        &[(DVector::from_vec(vec![1.0, 0.0]), 4.0), (DVector::from_vec(vec![0.0, 1.0]), 6.0)],
        &[(DVector::from_vec(vec![1.0, 0.0]), 2.5)],
    )
    .unwrap();
    assert_eq!(p.dim(), 2);
    assert_eq!(p.rows(), 3);
    assert_eq!(p.residual(&DVector::zeros(2)), DVector::from_vec(vec![3.0, 5.0, 1.5]));
    assert!(build_rbo_problem(0.0, &[], &[(DVector::from_vec(vec![1.0]), 1.0)]).is_ok());
    assert!(build_rbo_problem(0.0, &[], &[]).is_err());
    assert!(build_rbo_problem(0.0, &[(DVector::zeros(2), 0.0)], &[(DVector::zeros(3), 0.0)]).is_err());
}

#[test]
fn rbo_exact_on_linear_square_system() {
    let a = DVector::from_vec(vec![0.5, -2.0, 1.0]);
    let f = make_linear(a.clone(), DomainSpec::Unbounded).unwrap();
    let e = sample_gaussian(3, 3, 6).unwrap();
    for spec in [
        RegressionSpec::ridge(1e-14).unwrap(),
        RegressionSpec::lasso(1e-14).unwrap(),
        RegressionSpec::lp(),
        RegressionSpec::l1_ridge(1e-14).unwrap(),
    ] {
        let g = rbo_gradient(&f, &DVector::zeros(3), 0.1, &e, &[], &spec).unwrap();
        assert!((g.grad - &a).norm() < 1e-8, "{spec}");
        assert_eq!(g.fresh_evals, 4);
    }
}

#[test]
fn equivalence_grid() {
    for d in [4usize, 16, 64] {
        let f = make_concave_quadratic(d, 1.0, DVector::from_element(d, 0.1), 10.0).unwrap();
        let theta = DVector::from_element(d, -0.2);
        let e = sample_orthogonal(d, d, d as u64).unwrap();
        for sigma in [0.01, 0.1, 1.0] {
            for alpha in [0.01, 0.1] {
                let err = ridge_equivalence_error(&f, &theta, sigma, alpha, &e).unwrap();
                assert!(err <= 1e-8, "d={d} σ={sigma} α={alpha}: {err}");
            }
        }
    }
}

#[test]
fn lp_invariant_to_single_corruption() {
    let d = 6;
    let k = 10 * d;
    let mut rng = stream_rng(12, StreamTag::Fixture, 0);
    let a = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let f = make_linear(a, DomainSpec::Unbounded).unwrap();
    let theta = DVector::from_element(d, 0.3);
    let sigma = 0.1;
    let e = sample_gaussian(k, d, 13).unwrap();
    let center = f.eval(&theta);
    let fresh: Vec<(DVector<f64>, f64)> =
        (0..k).map(|i| (e.direction(i) * sigma, f.eval(&(&theta + e.direction(i) * sigma)))).collect();
    let spec = RegressionSpec::lp();
    let clean = solve(&build_rbo_problem(center, &fresh, &[]).unwrap(), &spec).unwrap();
    for i in 0..k {
        for shift in [-1e6, 1e6] {
            let mut bad = fresh.clone();
            bad[i].1 += shift;
            let g = solve(&build_rbo_problem(center, &bad, &[]).unwrap(), &spec).unwrap();
            assert!((g - &clean).norm() < 1e-6, "row {i}");
        }
    }
}

#[test]
fn lp_recovers_quadratic_gradient_under_corruption() {
    let f = objective_by_name("quadratic-d10").unwrap();
    let theta = DVector::zeros(10);
    let truth = f.gradient(&theta).unwrap();
    for seed in 0..5 {
        let e = sample_gaussian(100, 10, seed).unwrap();
        let noise = NoiseModel::new(0.2, CorruptionMode::HugeConstant(1e6), 0.0, seed)
            .unwrap()
            .with_protect_center(true);
        let g = rbo_gradient_noisy(&f, &theta, 1e-3, &e, &[], &RegressionSpec::lp(), &noise, 0).unwrap();
        assert!((g.grad - &truth).norm() < 0.05 * truth.norm(), "seed {seed}");
    }
}

/// Exact-recovery rate of LP decoding on linear F at ρ = 0.2 as k/d grows.
fn recovery_rate(d: usize, ratio: usize, trials: u64) -> f64 {
    let k = ratio * d;
    let sigma = 0.1;
    let mut ok = 0;
    for seed in 0..trials {
        let mut rng = stream_rng(seed, StreamTag::Fixture, 20 + ratio as u64);
        let a = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let f = make_linear(a.clone(), DomainSpec::Unbounded).unwrap();
        let e = sample_gaussian(k, d, seed).unwrap();
        let noise = NoiseModel::new(0.2, CorruptionMode::HugeConstant(1e6), 0.0, seed)
            .unwrap()
            .with_protect_center(true);
        let g = rbo_gradient_noisy(&f, &DVector::zeros(d), sigma, &e, &[], &RegressionSpec::lp(), &noise, 0).unwrap();
        if (g.grad - &a).norm() <= 1e-6 * a.norm() {
            ok += 1;
        }
    }
    ok as f64 / trials as f64
}

#[test]
fn recovery_threshold_sweep() {
    let d = 10;
    let rates: Vec<(usize, f64)> = [2usize, 3, 4, 6, 8, 10].iter().map(|&r| (r, recovery_rate(d, r, 40))).collect();
    for (r, rate) in &rates {
        println!("k = {r}d: exact recovery in {:.0}% of trials", rate * 100.0);
    }
    assert_eq!(rates.last().unwrap().1, 1.0);
    assert!(rates[0].1 < 1.0);
}
