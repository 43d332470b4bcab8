//! Gradient estimators: Monte-Carlo ES baselines and the regression-based
//! RBO estimator.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, ensure_finite};
use crate::noise::NoiseModel;
use crate::objectives::Objective;
use crate::regression::{solve, RegressionProblem, RegressionSpec};
use crate::sampling::PerturbationEnsemble;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EstimatorMethod {
    VanillaMc,
    ForwardFdMc,
    AntitheticMc,
    Rbo(RegressionSpec),
}

impl fmt::Display for EstimatorMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EstimatorMethod::VanillaMc => f.write_str("vanilla"),
            EstimatorMethod::ForwardFdMc => f.write_str("fd"),
            EstimatorMethod::AntitheticMc => f.write_str("antithetic"),
            EstimatorMethod::Rbo(spec) => write!(f, "rbo[{spec}]"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub grad: DVector<f64>,
    pub method: EstimatorMethod,
    pub fresh_evals: usize,
    pub reused_evals: usize,
    pub sigma: f64,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("σ must be positive, got {sigma}")))
    }
}

fn check_dims(f: &Objective, theta: &DVector<f64>, ensemble: &PerturbationEnsemble) -> Result<()> {
    if theta.len() != f.dim() || ensemble.dim() != f.dim() {
        return Err(Error::DimensionMismatch(format!(
            "objective has d={}, θ has {}, ensemble has {}",
            f.dim(),
            theta.len(),
            ensemble.dim()
        )));
    }
    Ok(())
}

/// Evaluates `F(θ + scale·g_i)` for every row; order follows the ensemble.
pub fn evaluate_perturbed(f: &Objective, theta: &DVector<f64>, scale: f64, ensemble: &PerturbationEnsemble) -> Vec<f64> {
    (0..ensemble.len())
        .into_par_iter()
        .map(|i| f.eval(&(theta + ensemble.direction(i) * scale)))
        .collect()
}

/// `Σ_i w_i g_i`
fn weighted_rows(ensemble: &PerturbationEnsemble, weights: &[f64]) -> DVector<f64> {
    ensemble.rows.transpose() * DVector::from_column_slice(weights)
}

/// `(1/(kσ)) Σ F(θ + σg_i) g_i`
pub fn vanilla_mc(f: &Objective, theta: &DVector<f64>, sigma: f64, ensemble: &PerturbationEnsemble) -> Result<GradientEstimate> {
    check_sigma(sigma)?;
    check_dims(f, theta, ensemble)?;
    let k = ensemble.len();
    let values = evaluate_perturbed(f, theta, sigma, ensemble);
    ensure_finite(&values, "objective value")?;
    let grad = weighted_rows(ensemble, &values) / (k as f64 * sigma);
    Ok(GradientEstimate {
        grad,
        method: EstimatorMethod::VanillaMc,
        fresh_evals: k,
        reused_evals: 0,
        sigma,
    })
}

/// `(1/(kσ)) Σ (F(θ + σg_i) - F(θ)) g_i`
pub fn forward_fd_mc(f: &Objective, theta: &DVector<f64>, sigma: f64, ensemble: &PerturbationEnsemble) -> Result<GradientEstimate> {
    check_sigma(sigma)?;
    check_dims(f, theta, ensemble)?;
    let k = ensemble.len();
    let center = f.eval(theta);
    let values = evaluate_perturbed(f, theta, sigma, ensemble);
    ensure_finite(&values, "objective value")?;
    let diffs: Vec<f64> = values.iter().map(|v| v - center).collect();
    let grad = weighted_rows(ensemble, &diffs) / (k as f64 * sigma);
    Ok(GradientEstimate {
        grad,
        method: EstimatorMethod::ForwardFdMc,
        fresh_evals: k + 1,
        reused_evals: 0,
        sigma,
    })
}

/// `(1/(2kσ)) Σ (F(θ + σg_i) - F(θ - σg_i)) g_i`
pub fn antithetic_mc(f: &Objective, theta: &DVector<f64>, sigma: f64, ensemble: &PerturbationEnsemble) -> Result<GradientEstimate> {
    check_sigma(sigma)?;
    check_dims(f, theta, ensemble)?;
    let k = ensemble.len();
    let plus = evaluate_perturbed(f, theta, sigma, ensemble);
    let minus = evaluate_perturbed(f, theta, -sigma, ensemble);
    ensure_finite(&plus, "objective value")?;
    ensure_finite(&minus, "objective value")?;
    let diffs: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| p - m).collect();
    let grad = weighted_rows(ensemble, &diffs) / (2.0 * k as f64 * sigma);
    Ok(GradientEstimate {
        grad,
        method: EstimatorMethod::AntitheticMc,
        fresh_evals: 2 * k,
        reused_evals: 0,
        sigma,
    })
}

/// Monte-Carlo baselines that can stand in for RBO inside the optimizer loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum McKind {
    Vanilla,
    ForwardFd,
    Antithetic,
}

impl fmt::Display for McKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            McKind::Vanilla => "vanilla",
            McKind::ForwardFd => "fd",
            McKind::Antithetic => "antithetic",
        })
    }
}

impl FromStr for McKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vanilla" => Ok(McKind::Vanilla),
            "fd" => Ok(McKind::ForwardFd),
            "antithetic" => Ok(McKind::Antithetic),
            other => Err(Error::invalid(format!(
                "unknown estimator `{other}` (expected vanilla, fd, antithetic or rbo)"
            ))),
        }
    }
}

impl McKind {
    pub fn method(self) -> EstimatorMethod {
        match self {
            McKind::Vanilla => EstimatorMethod::VanillaMc,
            McKind::ForwardFd => EstimatorMethod::ForwardFdMc,
            McKind::Antithetic => EstimatorMethod::AntitheticMc,
        }
    }
}

/// Combines already observed values into an MC gradient. `minus` holds
/// `F(θ - σg_i)` and is only read by the antithetic estimator.
pub fn mc_from_values(
    kind: McKind,
    ensemble: &PerturbationEnsemble,
    sigma: f64,
    center: f64,
    plus: &[f64],
    minus: &[f64],
) -> Result<DVector<f64>> {
    let k = ensemble.len() as f64;
    if plus.len() != ensemble.len() || (kind == McKind::Antithetic && minus.len() != ensemble.len()) {
        return Err(Error::DimensionMismatch("value count differs from ensemble size".into()));
    }
    Ok(match kind {
        McKind::Vanilla => weighted_rows(ensemble, plus) / (k * sigma),
        McKind::ForwardFd => {
            let diffs: Vec<f64> = plus.iter().map(|v| v - center).collect();
            weighted_rows(ensemble, &diffs) / (k * sigma)
        }
        McKind::Antithetic => {
            let diffs: Vec<f64> = plus.iter().zip(minus).map(|(p, m)| p - m).collect();
            weighted_rows(ensemble, &diffs) / (2.0 * k * sigma)
        }
    })
}

/// Stacks fresh rows `(z_i, F(θ+z_i))` then reused rows `(p_i - θ, r_i)` into
/// `Z` and `y = value - F(θ)`.
pub fn build_rbo_problem(
    center_value: f64,
    fresh: &[(DVector<f64>, f64)],
    reused: &[(DVector<f64>, f64)],
) -> Result<RegressionProblem> {
    let rows = fresh.len() + reused.len();
    if rows == 0 {
        return Err(Error::invalid("regression needs at least one row"));
    }
    let dim = fresh.first().or(reused.first()).map(|(z, _)| z.len()).unwrap_or(0);
    let mut z = DMatrix::zeros(rows, dim);
    let mut y = DVector::zeros(rows);
    for (i, (disp, value)) in fresh.iter().chain(reused.iter()).enumerate() {
        if disp.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "row {i} has length {}, expected {dim}",
                disp.len()
            )));
        }
        z.row_mut(i).copy_from(&disp.transpose());
        y[i] = value - center_value;
    }
    RegressionProblem::new(z, y)
}

/// Measurements of one RBO step: center value and perturbed values, after
/// any corruption.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurements {
    pub center_true: f64,
    pub center_observed: f64,
    pub perturbed_true: Vec<f64>,
    pub perturbed_observed: Vec<f64>,
}

/// Evaluates `F(θ)` and `F(θ + σg_j)` and passes them through `noise`,
/// with the center value at index 0 of the corrupted batch.
pub fn measure(
    f: &Objective,
    theta: &DVector<f64>,
    sigma: f64,
    ensemble: &PerturbationEnsemble,
    noise: &NoiseModel,
    counter: u64,
) -> Result<Measurements> {
    let center_true = f.eval(theta);
    let perturbed_true = evaluate_perturbed(f, theta, sigma, ensemble);
    if !center_true.is_finite() || !all_finite(&perturbed_true) {
        return Err(Error::NonFinite("objective value".into()));
    }
    let mut batch = Vec::with_capacity(perturbed_true.len() + 1);
    batch.push(center_true);
    batch.extend_from_slice(&perturbed_true);
    let observed = noise.corrupt_epoch(&batch, counter);
    Ok(Measurements {
        center_true,
        center_observed: observed[0],
        perturbed_true,
        perturbed_observed: observed[1..].to_vec(),
    })
}

/// RBO gradient from noiseless measurements; `reused` holds archive entries
/// `(p_i, r_i)` as absolute points.
pub fn rbo_gradient(
    f: &Objective,
    theta: &DVector<f64>,
    sigma: f64,
    ensemble: &PerturbationEnsemble,
    reused: &[(DVector<f64>, f64)],
    spec: &RegressionSpec,
) -> Result<GradientEstimate> {
    rbo_gradient_noisy(f, theta, sigma, ensemble, reused, spec, &NoiseModel::none(), 0)
}

#[allow(clippy::too_many_arguments)]
pub fn rbo_gradient_noisy(
    f: &Objective,
    theta: &DVector<f64>,
    sigma: f64,
    ensemble: &PerturbationEnsemble,
    reused: &[(DVector<f64>, f64)],
    spec: &RegressionSpec,
    noise: &NoiseModel,
    counter: u64,
) -> Result<GradientEstimate> {
    check_sigma(sigma)?;
    check_dims(f, theta, ensemble)?;
    let m = measure(f, theta, sigma, ensemble, noise, counter)?;
    let fresh: Vec<(DVector<f64>, f64)> = (0..ensemble.len())
        .map(|i| (ensemble.direction(i) * sigma, m.perturbed_observed[i]))
        .collect();
    let reused_rows: Vec<(DVector<f64>, f64)> = reused.iter().map(|(p, r)| (p - theta, *r)).collect();
    let problem = build_rbo_problem(m.center_observed, &fresh, &reused_rows)?;
    let grad = solve(&problem, spec)?;
    Ok(GradientEstimate {
        grad,
        method: EstimatorMethod::Rbo(*spec),
        fresh_evals: ensemble.len() + 1,
        reused_evals: reused.len(),
        sigma,
    })
}

/// Shrinkage `σ²/(σ² + 2α)` relating ridge-RBO to orthogonal forward-FD ES.
pub fn ridge_equivalence_factor(sigma: f64, alpha: f64) -> f64 {
    sigma * sigma / (sigma * sigma + 2.0 * alpha)
}

/// Relative discrepancy between ridge-RBO and the rescaled forward-FD
/// estimate on a `k = d` orthogonal ensemble. Both estimators consume the
/// same measurements.
pub fn ridge_equivalence_error(
    f: &Objective,
    theta: &DVector<f64>,
    sigma: f64,
    alpha: f64,
    ensemble: &PerturbationEnsemble,
) -> Result<f64> {
    let spec = RegressionSpec::ridge(alpha)?;
    let rbo = rbo_gradient(f, theta, sigma, ensemble, &[], &spec)?;
    let fd = forward_fd_mc(f, theta, sigma, ensemble)?;
    let expected = fd.grad * ridge_equivalence_factor(sigma, alpha);
    Ok((rbo.grad - &expected).norm() / expected.norm().max(f64::MIN_POSITIVE))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    use crate::objectives::{make_concave_quadratic, make_linear, DomainSpec};
    use crate::sampling::sample_orthogonal;

    fn linear(a: &[f64]) -> Objective {
        make_linear(DVector::from_column_slice(a), DomainSpec::Unbounded).unwrap()
    }

    fn constant(c: f64, dim: usize) -> Objective {
        Objective::new(
            "constant",
            dim,
            std::sync::Arc::new(move |_: &DVector<f64>| c),
            None,
            DomainSpec::Unbounded,
            crate::objectives::Constants::UNCERTIFIED,
            None,
        )
    }

    #[test]
    fn zero_direction_gives_zero_vanilla() {
        let f = linear(&[1.0, 2.0]);
        let ens = PerturbationEnsemble::from_rows(DMatrix::zeros(1, 2));
        let est = vanilla_mc(&f, &DVector::zeros(2), 0.1, &ens).unwrap();
        assert_eq!(est.grad, DVector::zeros(2));
        assert_eq!(est.fresh_evals, 1);
    }

    #[test]
    fn constant_objective_cancellations() {
        let f = constant(3.0, 3);
        let rows = DMatrix::from_row_slice(2, 3, &[1.0, -0.5, 2.0, -1.0, 0.5, -2.0]);
        let ens = PerturbationEnsemble::from_rows(rows);
        let theta = DVector::zeros(3);
        // Antithetically paired rows cancel in the vanilla estimator too.
        assert_eq!(vanilla_mc(&f, &theta, 0.1, &ens).unwrap().grad, DVector::zeros(3));
        assert_eq!(forward_fd_mc(&f, &theta, 0.1, &ens).unwrap().grad, DVector::zeros(3));
        assert_eq!(antithetic_mc(&f, &theta, 0.1, &ens).unwrap().grad, DVector::zeros(3));
    }

    #[test]
    fn eval_counts() {
        let f = linear(&[1.0, 1.0]);
        let ens = sample_orthogonal(2, 2, 1).unwrap();
        let theta = DVector::zeros(2);
        f.reset_evaluations();
        assert_eq!(forward_fd_mc(&f, &theta, 0.1, &ens).unwrap().fresh_evals, 3);
        assert_eq!(f.evaluations(), 3);
        f.reset_evaluations();
        assert_eq!(antithetic_mc(&f, &theta, 0.1, &ens).unwrap().fresh_evals, 4);
        assert_eq!(f.evaluations(), 4);
    }

    #[test]
    fn build_problem_layout() {
        let fresh = vec![
            (DVector::from_vec(vec![1.0, 0.0]), 3.0),
            (DVector::from_vec(vec![0.0, 1.0]), 5.0),
        ];
        let p = build_rbo_problem(0.0, &fresh, &[]).unwrap();
        assert_eq!(p.z, DMatrix::identity(2, 2));
        assert_eq!(p.y.as_slice(), &[3.0, 5.0]);

        let reused = vec![(DVector::from_vec(vec![1.0, 0.0]), 7.0)];
        let p = build_rbo_problem(2.0, &fresh, &reused).unwrap();
        assert_eq!(p.z.row(2).iter().copied().collect::<Vec<_>>(), vec![1.0, 0.0]);
        assert_eq!(p.y[2], 5.0);

        let p = build_rbo_problem(2.0, &[], &reused).unwrap();
        assert_eq!(p.rows(), 1);

        assert!(build_rbo_problem(0.0, &[], &[]).is_err());
        let bad = vec![(DVector::from_vec(vec![1.0]), 1.0)];
        assert!(build_rbo_problem(0.0, &fresh, &bad).is_err());
    }

    #[test]
    fn rbo_exact_on_linear_square_system() {
        let a = [0.3, -1.2, 2.0];
        let f = linear(&a);
        let ens = sample_orthogonal(3, 3, 2).unwrap();
        let theta = DVector::from_vec(vec![0.5, 0.5, -0.5]);
        for spec in [RegressionSpec::lp(), RegressionSpec::ridge(1e-14).unwrap()] {
            let est = rbo_gradient(&f, &theta, 0.1, &ens, &[], &spec).unwrap();
            assert_relative_eq!(est.grad, DVector::from_column_slice(&a), epsilon = 1e-9);
            assert_eq!(est.fresh_evals, 4);
        }
    }

    #[test]
    fn antithetic_on_quadratic_is_exact_directional() {
        let f = make_concave_quadratic(3, 2.0, DVector::from_vec(vec![0.1, 0.2, -0.3]), 1.0).unwrap();
        let theta = DVector::from_vec(vec![0.4, -0.1, 0.0]);
        let g = DVector::from_vec(vec![0.3, 1.0, -0.7]);
        let sigma = 0.25;
        let diff = f.eval(&(&theta + &g * sigma)) - f.eval(&(&theta - &g * sigma));
        assert_relative_eq!(diff, 2.0 * sigma * f.gradient(&theta).unwrap().dot(&g), epsilon = 1e-14);
    }

    #[test]
    fn cubic_antithetic_beats_forward() {
        let cube = |x: f64| x * x * x;
        let sigma = 0.1;
        // θ = 0: both slopes equal σ².
        let anti0 = (cube(sigma) - cube(-sigma)) / (2.0 * sigma);
        let fwd0 = (cube(sigma) - cube(0.0)) / sigma;
        assert_relative_eq!(anti0, 0.01, epsilon = 1e-15);
        assert_relative_eq!(fwd0, 0.01, epsilon = 1e-15);
        // θ = 1: true slope 3.
        let anti1 = (cube(1.0 + sigma) - cube(1.0 - sigma)) / (2.0 * sigma);
        let fwd1 = (cube(1.0 + sigma) - cube(1.0)) / sigma;
        assert!((anti1 - 3.0).abs() < (fwd1 - 3.0).abs());
        assert_relative_eq!(anti1 - 3.0, sigma * sigma, epsilon = 1e-12);
    }

    #[test]
    fn equivalence_small_case() {
        let f = make_concave_quadratic(4, 1.0, DVector::from_element(4, 0.2), 1.0).unwrap();
        let ens = sample_orthogonal(4, 4, 8).unwrap();
        let err = ridge_equivalence_error(&f, &DVector::zeros(4), 0.1, 0.01, &ens).unwrap();
        assert!(err <= 1e-10, "{err}");
    }

    #[test]
    fn combined_values_match_direct_estimators() {
        let f = make_concave_quadratic(3, 1.0, DVector::from_element(3, 0.1), 1.0).unwrap();
        let ens = sample_orthogonal(3, 3, 4).unwrap();
        let theta = DVector::from_vec(vec![0.2, 0.0, -0.1]);
        let sigma = 0.05;
        let center = f.eval(&theta);
        let plus = evaluate_perturbed(&f, &theta, sigma, &ens);
        let minus = evaluate_perturbed(&f, &theta, -sigma, &ens);
        let cases = [
            (McKind::Vanilla, vanilla_mc(&f, &theta, sigma, &ens).unwrap()),
            (McKind::ForwardFd, forward_fd_mc(&f, &theta, sigma, &ens).unwrap()),
            (McKind::Antithetic, antithetic_mc(&f, &theta, sigma, &ens).unwrap()),
        ];
        for (kind, direct) in cases {
            let g = mc_from_values(kind, &ens, sigma, center, &plus, &minus).unwrap();
            assert_relative_eq!(g, direct.grad, epsilon = 1e-12);
            assert_eq!(kind.to_string().parse::<McKind>().unwrap(), kind);
        }
    }

    #[test]
    fn rejects_bad_sigma_and_dims() {
        let f = linear(&[1.0, 1.0]);
        let ens = sample_orthogonal(2, 2, 1).unwrap();
        assert!(vanilla_mc(&f, &DVector::zeros(2), 0.0, &ens).is_err());
        assert!(vanilla_mc(&f, &DVector::zeros(3), 0.1, &ens).is_err());
    }
}
