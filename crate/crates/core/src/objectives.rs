//! Synthetic blackbox objectives with certified regularity constants.
//!
//! Every objective is maximized. Quadratic and linear objectives carry an
//! analytic gradient and a known optimum so that estimators and convergence
//! bounds can be checked against ground truth. The toy control task has
//! neither and is only meant for end-to-end smoke runs.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::linalg::all_finite;

pub type EvalFn = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type GradFn = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Feasible parameter domain.
#[derive(Debug, Clone, PartialEq)]
pub enum DomainSpec {
    Ball { center: DVector<f64>, radius: f64 },
    Box { lo: DVector<f64>, hi: DVector<f64> },
    Unbounded,
}

impl DomainSpec {
    pub fn ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !all_finite(center.as_slice()) {
            return Err(Error::invalid("ball radius must be positive and finite"));
        }
        Ok(DomainSpec::Ball { center, radius })
    }

    pub fn centered_ball(dim: usize, radius: f64) -> Result<Self> {
        Self::ball(DVector::zeros(dim), radius)
    }

    pub fn cube(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch("box bounds differ in length".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h) || !l.is_finite() || !h.is_finite()) {
            return Err(Error::invalid("box requires finite lo <= hi"));
        }
        Ok(DomainSpec::Box { lo, hi })
    }

    /// l2 diameter; infinite for the unbounded domain.
    pub fn diameter(&self) -> f64 {
        match self {
            DomainSpec::Ball { radius, .. } => 2.0 * radius,
            DomainSpec::Box { lo, hi } => (hi - lo).norm(),
            DomainSpec::Unbounded => f64::INFINITY,
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self {
            DomainSpec::Ball { center, radius } => (x - center).norm() <= radius + tol,
            DomainSpec::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol),
            DomainSpec::Unbounded => true,
        }
    }

    /// Euclidean projection onto the domain.
    pub fn project(&self, u: &DVector<f64>) -> DVector<f64> {
        match self {
            DomainSpec::Ball { center, radius } => {
                let offset = u - center;
                let dist = offset.norm();
                if dist <= *radius {
                    u.clone()
                } else {
                    center + offset * (*radius / dist)
                }
            }
            DomainSpec::Box { lo, hi } => DVector::from_iterator(
                u.len(),
                u.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(v, (l, h))| v.clamp(*l, *h)),
            ),
            DomainSpec::Unbounded => u.clone(),
        }
    }
}

/// Regularity constants. NaN marks an uncertified constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constants {
    /// Lipschitz bound `L` on `|F(x) - F(y)| / |x - y|`.
    pub lipschitz: f64,
    /// Smoothness bound `λ` on the gradient's Lipschitz constant.
    pub smoothness: f64,
    /// Strong-concavity parameter `μ`; zero when not strongly concave.
    pub strong_concavity: f64,
    /// l2 diameter `B` of the domain.
    pub diameter: f64,
}

impl Constants {
    pub const UNCERTIFIED: Constants = Constants {
        lipschitz: f64::NAN,
        smoothness: f64::NAN,
        strong_concavity: f64::NAN,
        diameter: f64::NAN,
    };

    pub fn is_certified(&self) -> bool {
        !(self.lipschitz.is_nan()
            || self.smoothness.is_nan()
            || self.strong_concavity.is_nan()
            || self.diameter.is_nan())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub point: DVector<f64>,
    pub value: f64,
}

#[derive(Clone)]
pub struct Objective {
    name: String,
    dim: usize,
    eval: EvalFn,
    grad: Option<GradFn>,
    domain: DomainSpec,
    constants: Constants,
    optimum: Option<Optimum>,
    evaluations: Arc<AtomicUsize>,
}

impl fmt::Debug for Objective {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Objective")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("domain", &self.domain)
            .field("constants", &self.constants)
            .field("optimum", &self.optimum)
            .finish_non_exhaustive()
    }
}

impl Objective {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        eval: EvalFn,
        grad: Option<GradFn>,
        domain: DomainSpec,
        constants: Constants,
        optimum: Option<Optimum>,
    ) -> Self {
        Objective {
            name: name.into(),
            dim,
            eval,
            grad,
            domain,
            constants,
            optimum,
            evaluations: Arc::new(AtomicUsize::new(0)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn constants(&self) -> Constants {
        self.constants
    }

    pub fn optimum(&self) -> Option<&Optimum> {
        self.optimum.as_ref()
    }

    /// Blackbox evaluation; every call is counted.
    pub fn eval(&self, theta: &DVector<f64>) -> f64 {
        debug_assert_eq!(theta.len(), self.dim);
        self.evaluations.fetch_add(1, Ordering::Relaxed);
        (self.eval)(theta)
    }

    pub fn has_gradient(&self) -> bool {
        self.grad.is_some()
    }

    /// Analytic gradient, when the objective provides one. Not counted.
    pub fn gradient(&self, theta: &DVector<f64>) -> Option<DVector<f64>> {
        self.grad.as_ref().map(|g| g(theta))
    }

    /// Number of `eval` calls made through this objective and its clones.
    pub fn evaluations(&self) -> usize {
        self.evaluations.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evaluations.store(0, Ordering::Relaxed);
    }

    /// Optimality gap `F(θ*) - value`, when the optimum is known.
    pub fn gap(&self, value: f64) -> Option<f64> {
        self.optimum.as_ref().map(|o| o.value - value)
    }
}

/// `F(θ) = -(μ/2)|θ - θ*|²` on the ball of the given radius around the origin.
pub fn make_concave_quadratic(
    dim: usize,
    curvature: f64,
    optimum: DVector<f64>,
    radius: f64,
) -> Result<Objective> {
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !(curvature > 0.0 && curvature.is_finite()) {
        return Err(Error::invalid("curvature must be positive"));
    }
    if optimum.len() != dim {
        return Err(Error::DimensionMismatch(format!(
            "optimum has length {}, expected {dim}",
            optimum.len()
        )));
    }
    if !all_finite(optimum.as_slice()) {
        return Err(Error::NonFinite("quadratic optimum".into()));
    }
    let opt_norm = optimum.norm();
    if opt_norm > radius {
        return Err(Error::invalid("optimum must lie inside the domain ball"));
    }
    let domain = DomainSpec::centered_ball(dim, radius)?;
    let constants = Constants {
        lipschitz: curvature * (radius + opt_norm),
        smoothness: curvature,
        strong_concavity: curvature,
        diameter: domain.diameter(),
    };
    let star = optimum.clone();
    let eval: EvalFn = Arc::new(move |theta: &DVector<f64>| {
        -0.5 * curvature * crate::linalg::squared_distance(theta, &star)
    });
    let star = optimum.clone();
    let grad: GradFn = Arc::new(move |theta: &DVector<f64>| (theta - &star) * (-curvature));
    Ok(Objective::new(
        format!("quadratic-d{dim}"),
        dim,
        eval,
        Some(grad),
        domain,
        constants,
        Some(Optimum {
            point: optimum,
            value: 0.0,
        }),
    ))
}

/// `F(θ) = aᵀθ`.
pub fn make_linear(slope: DVector<f64>, domain: DomainSpec) -> Result<Objective> {
    let dim = slope.len();
    if dim == 0 {
        return Err(Error::invalid("dimension must be positive"));
    }
    if !all_finite(slope.as_slice()) {
        return Err(Error::NonFinite("linear slope".into()));
    }
    let optimum = linear_optimum(&slope, &domain);
    let constants = Constants {
        lipschitz: slope.norm(),
        smoothness: 0.0,
        strong_concavity: 0.0,
        diameter: domain.diameter(),
    };
    let a = slope.clone();
    let eval: EvalFn = Arc::new(move |theta: &DVector<f64>| a.dot(theta));
    let a = slope.clone();
    let grad: GradFn = Arc::new(move |_: &DVector<f64>| a.clone());
    Ok(Objective::new(
        format!("linear-d{dim}"),
        dim,
        eval,
        Some(grad),
        domain,
        constants,
        optimum,
    ))
}

fn linear_optimum(slope: &DVector<f64>, domain: &DomainSpec) -> Option<Optimum> {
    let point = match domain {
        DomainSpec::Ball { center, radius } => {
            let n = slope.norm();
            if n == 0.0 {
                center.clone()
            } else {
                center + slope * (*radius / n)
            }
        }
        DomainSpec::Box { lo, hi } => DVector::from_iterator(
            slope.len(),
            slope
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .map(|(a, (l, h))| if *a >= 0.0 { *h } else { *l }),
        ),
        DomainSpec::Unbounded => return None,
    };
    Some(Optimum {
        value: slope.dot(&point),
        point,
    })
}

/// Integration step of the toy point-mass task.
const TOY_DT: f64 = 0.1;

/// A deterministic planar point mass steered by a linear feedback policy.
///
/// The state starts at rest at the origin. At each step the policy maps the
/// observation `(p - target, v)` through a 2x4 matrix (θ, row-major) to an
/// acceleration clamped to `[-1, 1]²`. `F` is the negative terminal distance
/// to the target.
pub fn make_toy_control(horizon: usize, target: [f64; 2]) -> Result<Objective> {
    if horizon == 0 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if !all_finite(&target) {
        return Err(Error::NonFinite("toy-control target".into()));
    }
    let eval: EvalFn = Arc::new(move |theta: &DVector<f64>| {
        let (mut p, mut v) = ([0.0f64; 2], [0.0f64; 2]);
        for _ in 0..horizon {
            let obs = [p[0] - target[0], p[1] - target[1], v[0], v[1]];
            for axis in 0..2 {
                let row = &theta.as_slice()[axis * 4..axis * 4 + 4];
                let accel: f64 = row.iter().zip(obs.iter()).map(|(w, o)| w * o).sum();
                v[axis] += TOY_DT * accel.clamp(-1.0, 1.0);
            }
            p[0] += TOY_DT * v[0];
            p[1] += TOY_DT * v[1];
        }
        -((p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2)).sqrt()
    });
    Ok(Objective::new(
        "toy-control",
        8,
        eval,
        None,
        DomainSpec::Unbounded,
        Constants::UNCERTIFIED,
        None,
    ))
}

/// Optimum used by the registered `quadratic-d<k>` objectives: alternating
/// signs scaled to norm 1/2 inside the unit ball.
pub fn registry_quadratic_optimum(dim: usize) -> DVector<f64> {
    let scale = 0.5 / (dim as f64).sqrt();
    DVector::from_fn(dim, |i, _| if i % 2 == 0 { scale } else { -scale })
}

/// Looks up a registered objective: `quadratic-d<k>`, `linear-d<k>` or
/// `toy-control`.
pub fn objective_by_name(name: &str) -> Result<Objective> {
    if name == "toy-control" {
        return make_toy_control(50, [1.0, 0.5]);
    }
    let parse_dim = |prefix: &str| -> Option<usize> {
        name.strip_prefix(prefix)
            .and_then(|s| s.parse::<usize>().ok())
            .filter(|d| *d >= 1)
    };
    if let Some(dim) = parse_dim("quadratic-d") {
        return make_concave_quadratic(dim, 1.0, registry_quadratic_optimum(dim), 1.0);
    }
    if let Some(dim) = parse_dim("linear-d") {
        let slope = DVector::from_element(dim, 1.0 / (dim as f64).sqrt());
        return make_linear(slope, DomainSpec::centered_ball(dim, 1.0)?);
    }
    Err(Error::UnknownObjective(name.to_string()))
}
