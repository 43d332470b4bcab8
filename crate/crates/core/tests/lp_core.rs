use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use rand_distr::StandardNormal;
use rbo_core::lp_core::{solve_lp, LpControls, LpOutcome, StandardFormLp};
use rbo_core::rng::{stream_rng, StreamTag};

fn lp(a: DMatrix<f64>, b: Vec<f64>, c: Vec<f64>) -> StandardFormLp {
    StandardFormLp::new(a, DVector::from_vec(b), DVector::from_vec(c)).unwrap()
}

#[test]
fn forced_solution() {
    let s = solve_lp(&lp(DMatrix::from_element(1, 1, 1.0), vec![1.0], vec![1.0]), &LpControls::default())
        .unwrap()
        .optimal()
        .unwrap();
    assert_eq!(s.x[0], 1.0);
    assert_eq!(s.objective, 1.0);
}

#[test]
fn simplex_face() {
    let p = lp(DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 1.0]), vec![1.0], vec![-1.0, -1.0, 0.0]);
    let s = solve_lp(&p, &LpControls::default()).unwrap().optimal().unwrap();
    assert!((s.objective + 1.0).abs() < 1e-12);
    assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-12);
}

#[test]
fn infeasible_and_unbounded() {
    let p = lp(DMatrix::from_element(1, 1, 1.0), vec![-1.0], vec![1.0]);
    assert_eq!(solve_lp(&p, &LpControls::default()).unwrap(), LpOutcome::Infeasible);
    assert!(solve_lp(&p, &LpControls::default()).unwrap().optimal().is_err());
    let p = lp(DMatrix::from_row_slice(1, 2, &[1.0, -1.0]), vec![0.0], vec![-1.0, 0.0]);
    assert_eq!(solve_lp(&p, &LpControls::default()).unwrap(), LpOutcome::Unbounded);
    assert!(StandardFormLp::new(DMatrix::zeros(2, 2), DVector::zeros(1), DVector::zeros(2)).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Feasible by construction (`b = A x0`, `x0 ≥ 0`) and bounded (`c = Aᵀy0 + s0`, `s0 ≥ 0`).
    #[test]
    fn strong_duality_on_random_instances(seed in any::<u64>(), m in 1usize..8, extra in 1usize..10) {
        let n = m + extra;
        let mut rng = stream_rng(seed, StreamTag::Fixture, 7);
        let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x0 = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let y0 = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let s0 = DVector::from_fn(n, |_, _| rng.random::<f64>());
        let b = &a * &x0;
        let c = a.transpose() * &y0 + &s0;
        let p = StandardFormLp::new(a.clone(), b.clone(), c.clone()).unwrap();
        let s = solve_lp(&p, &LpControls::default()).unwrap().optimal().unwrap();

        let scale = 1.0 + b.amax() + c.amax();
        prop_assert!((&a * &s.x - &b).amax() <= 1e-8 * scale);
        prop_assert!(s.x.min() >= -1e-9);
        let reduced = &c - a.transpose() * &s.duals;
        prop_assert!(reduced.min() >= -1e-8 * scale);
        prop_assert!((c.dot(&s.x) - b.dot(&s.duals)).abs() <= 1e-8 * scale);
        prop_assert!((s.objective - c.dot(&s.x)).abs() <= 1e-9 * scale);
        // Weak duality against the constructed dual point.
        prop_assert!(s.objective >= b.dot(&y0) - 1e-8 * scale);
    }
}
