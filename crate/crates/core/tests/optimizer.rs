use nalgebra::DVector;
use proptest::prelude::*;
use rbo_core::estimators::ridge_equivalence_factor;
use rbo_core::objectives::{make_concave_quadratic, objective_by_name};
use rbo_core::optimizer::{project, run};
use rbo_core::{
    CorruptionMode, DomainSpec, FlowConfig, McKind, NoiseModel, OptimizerConfig, RegressionSpec, SamplerKind,
    Schedules, TrustRegionPolicy,
};

fn noisy(seed: u64) -> NoiseModel {
    NoiseModel::new(0.2, CorruptionMode::HugeConstant(1e6), 0.0, seed).unwrap().with_protect_center(true)
}

#[test]
fn identical_configs_give_identical_traces() {
    let f = objective_by_name("quadratic-d6").unwrap();
    let mut cfg = OptimizerConfig::new(30, 24, 5);
    cfg.noise = noisy(5);
    let start = DVector::from_element(6, -0.3);
    let (a, ta) = run(&f, &start, &cfg).unwrap();
    let (b, tb) = run(&f, &start, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(ta, tb);
    assert_eq!(ta.to_csv_string(), tb.to_csv_string());

    cfg.seed = 6;
    let (c, _) = run(&f, &start, &cfg).unwrap();
    assert_ne!(a, c);
}

#[test]
fn trace_counters_match_evaluation_counter() {
    let f = objective_by_name("quadratic-d5").unwrap();
    let start = DVector::zeros(5);
    let mut configs = Vec::new();
    for policy in [
        TrustRegionPolicy::None,
        TrustRegionPolicy::dynamic(0.2).unwrap(),
        TrustRegionPolicy::fixed_radius(0.05).unwrap(),
    ] {
        let mut cfg = OptimizerConfig::new(12, 15, 1);
        cfg.policy = policy;
        configs.push(cfg.clone());
        cfg.flow = Some(FlowConfig::default());
        configs.push(cfg);
    }
    for kind in [McKind::Vanilla, McKind::ForwardFd, McKind::Antithetic] {
        let mut cfg = OptimizerConfig::new(12, 15, 1);
        cfg.mc_baseline = Some(kind);
        configs.push(cfg);
    }
    for cfg in configs {
        f.reset_evaluations();
        let (_, trace) = run(&f, &start, &cfg).unwrap();
        assert_eq!(trace.total_fresh_evals(), f.evaluations(), "{cfg:?}");
    }
}

#[test]
fn dynamic_reuse_accounting() {
    let f = objective_by_name("quadratic-d8").unwrap();
    let (k, tau, epochs) = (40, 0.1, 25);
    let mut cfg = OptimizerConfig::new(epochs, k, 2);
    cfg.policy = TrustRegionPolicy::dynamic(tau).unwrap();
    let (_, trace) = run(&f, &DVector::zeros(8), &cfg).unwrap();
    let reuse = (tau * k as f64).floor() as usize;
    // Epoch 0 has an empty archive; afterwards it always holds at least k+1 points.
    assert_eq!(trace.records[0].fresh_evals, k + 1);
    for r in &trace.records[1..] {
        assert_eq!(r.fresh_evals, k - reuse + 1);
        assert_eq!(r.reused_evals, reuse);
    }
}

#[test]
fn ridge_matches_rescaled_forward_differences() {
    let d = 6;
    let f = make_concave_quadratic(d, 1.0, DVector::from_element(d, 0.2), 1.0).unwrap();
    let start = DVector::from_element(d, -0.3);
    let (sigma, alpha, eta) = (0.1, 0.02, 0.05);
    let mut rbo = OptimizerConfig::new(40, d, 9);
    rbo.spec = RegressionSpec::ridge(alpha).unwrap();
    rbo.policy = TrustRegionPolicy::None;
    rbo.sampler = SamplerKind::Orthogonal;
    rbo.schedules = Schedules::constant(sigma, eta).unwrap();
    let mut es = rbo.clone();
    es.mc_baseline = Some(McKind::ForwardFd);
    es.schedules = Schedules::constant(sigma, eta * ridge_equivalence_factor(sigma, alpha)).unwrap();

    let (_, a) = run(&f, &start, &rbo).unwrap();
    let (_, b) = run(&f, &start, &es).unwrap();
    for (x, y) in a.records.iter().zip(&b.records) {
        assert!((&x.theta - &y.theta).norm() <= 1e-10, "epoch {}", x.epoch);
    }
}

#[test]
fn projection_examples() {
    let ball = DomainSpec::centered_ball(2, 1.0).unwrap();
    let inside = DVector::from_vec(vec![0.3, -0.4]);
    assert_eq!(project(&inside, &ball), inside);
    assert_eq!(project(&DVector::from_vec(vec![2.0, 0.0]), &ball), DVector::from_vec(vec![1.0, 0.0]));
    let cube = DomainSpec::cube(DVector::from_element(2, -1.0), DVector::from_element(2, 1.0)).unwrap();
    assert_eq!(project(&DVector::from_vec(vec![2.0, -3.0]), &cube), DVector::from_vec(vec![1.0, -1.0]));
}

#[test]
fn flow_uses_no_more_fresh_evaluations_than_base() {
    let f = objective_by_name("quadratic-d10").unwrap();
    let start = DVector::zeros(10);
    let threshold = 0.5 * f.gap(f.eval(&start)).unwrap();
    let mut base = OptimizerConfig::new(60, 30, 4);
    base.schedules = Schedules::constant(0.05, 0.1).unwrap();
    let mut flow = base.clone();
    flow.flow = Some(FlowConfig::default());

    let (_, tb) = run(&f, &start, &base).unwrap();
    let (_, tf) = run(&f, &start, &flow).unwrap();
    let hit = |t: &rbo_core::Trace| t.records.iter().position(|r| r.gap.unwrap() <= threshold);
    let (hb, hf) = (hit(&tb).expect("base reaches threshold"), hit(&tf).expect("flow reaches threshold"));
    let per_epoch = |t: &rbo_core::Trace, n: usize| t.records[..=n].iter().map(|r| r.fresh_evals).sum::<usize>() as f64 / (n + 1) as f64;
    assert!(per_epoch(&tf, hf) <= per_epoch(&tb, hb));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn iterates_stay_in_domain(seed in any::<u64>(), eta in 0.1f64..50.0, use_box in any::<bool>()) {
        let d = 4;
        let domain = if use_box {
            DomainSpec::cube(DVector::from_element(d, -0.5), DVector::from_element(d, 0.25)).unwrap()
        } else {
            DomainSpec::centered_ball(d, 0.5).unwrap()
        };
        let f = rbo_core::objectives::make_linear(DVector::from_vec(vec![1.0, -2.0, 0.5, 3.0]), domain.clone()).unwrap();
        let mut cfg = OptimizerConfig::new(15, 8, seed);
        cfg.schedules = Schedules::constant(0.1, eta).unwrap();
        cfg.noise = NoiseModel::new(0.25, CorruptionMode::SignFlip, 0.0, seed).unwrap();
        let (last, trace) = run(&f, &DVector::zeros(d), &cfg).unwrap();
        prop_assert!(domain.contains(&last, 1e-12));
        for r in &trace.records {
            prop_assert!(domain.contains(&r.theta, 1e-12));
        }
    }
}
