//! Closed-form theory artifacts: the critical corruption fraction ρ*, the
//! convergence-bound right-hand sides and the gradient recovery envelope.
//!
//! ρ* is defined through the half-normal variable `Y = |X|`, `X ~ N(0, 1)`.
//! With `g(x) = ∫_x^∞ y f(y) dy` and `x*` the point where `g(x*) = E[Y] / 2`,
//! `ρ* = 1 - F(x*)` where `F` is the CDF of `Y`. Since
//! `g(x) = √(2/π) e^{-x²/2}`, the root is `x* = √(2 ln 2)` and
//! `ρ* = erfc(√(ln 2))`. A second, purely numerical pipeline (adaptive
//! quadrature plus bisection) is kept alongside as a cross-check.

use std::f64::consts::{LN_2, PI, SQRT_2};

use crate::error::{Error, Result};

/// Published value of the critical corruption fraction.
pub const RHO_STAR_REFERENCE: f64 = 0.2390318914495168;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoStarResult {
    pub x_star: f64,
    pub rho_star: f64,
    /// `|g(x*) - E[Y]/2|` evaluated in closed form.
    pub residual: f64,
    pub numeric_x_star: f64,
    pub numeric_rho_star: f64,
}

impl RhoStarResult {
    /// Largest disagreement between the closed-form and numeric pipelines.
    pub fn pipeline_gap(&self) -> f64 {
        (self.x_star - self.numeric_x_star)
            .abs()
            .max((self.rho_star - self.numeric_rho_star).abs())
    }
}

pub fn halfnormal_pdf(y: f64) -> f64 {
    if y < 0.0 {
        0.0
    } else {
        (2.0 / PI).sqrt() * (-0.5 * y * y).exp()
    }
}

pub fn halfnormal_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        libm::erf(x / SQRT_2)
    }
}

/// `g(x) = ∫_x^∞ y f(y) dy` in closed form.
pub fn tail_first_moment(x: f64) -> f64 {
    (2.0 / PI).sqrt() * (-0.5 * x * x).exp()
}

pub fn halfnormal_mean() -> f64 {
    (2.0 / PI).sqrt()
}

/// Adaptive Simpson quadrature with Richardson correction.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// Beyond this point the half-normal tail moment is below 1e-300.
const TAIL_CUTOFF: f64 = 38.0;
const QUAD_TOL: f64 = 1e-16;

fn numeric_tail_first_moment(x: f64) -> f64 {
    let integrand = |y: f64| y * halfnormal_pdf(y);
    // Split at a fixed point so the peak near y = 1 is always resolved.
    if x < 4.0 {
        integrate(&integrand, x, 4.0, QUAD_TOL) + integrate(&integrand, 4.0, TAIL_CUTOFF, QUAD_TOL)
    } else {
        integrate(&integrand, x, TAIL_CUTOFF.max(x + 1.0), QUAD_TOL)
    }
}

pub fn numeric_halfnormal_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        integrate(&halfnormal_pdf, 0.0, x, QUAD_TOL)
    }
}

pub fn compute_rho_star() -> RhoStarResult {
    let x_star = (2.0 * LN_2).sqrt();
    let rho_star = libm::erfc(LN_2.sqrt());
    let residual = (tail_first_moment(x_star) - 0.5 * halfnormal_mean()).abs();

    // Numeric route: E[Y] = g(0) by quadrature, bisection for g(x) = E[Y]/2.
    let half_mean = 0.5 * numeric_tail_first_moment(0.0);
    let (mut lo, mut hi) = (0.0f64, 10.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if numeric_tail_first_moment(mid) > half_mean {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let numeric_x_star = 0.5 * (lo + hi);
    let numeric_rho_star = 1.0 - numeric_halfnormal_cdf(numeric_x_star);

    RhoStarResult {
        x_star,
        rho_star,
        residual,
        numeric_x_star,
        numeric_rho_star,
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} must be positive and finite, got {v}")))
    }
}

/// Average-gap bound for concave objectives: `(13/2)·B·L / √T`.
pub fn theorem1_bound(diameter: f64, lipschitz: f64, epochs: usize) -> Result<f64> {
    positive("B", diameter)?;
    positive("L", lipschitz)?;
    if epochs == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    Ok(6.5 * diameter * lipschitz / (epochs as f64).sqrt())
}

/// Average-gap bound for μ-strongly concave objectives: `(6L²/μ)(1 + ln T)/T`.
pub fn theorem2_bound(lipschitz: f64, strong_concavity: f64, epochs: usize) -> Result<f64> {
    positive("L", lipschitz)?;
    positive("μ", strong_concavity)?;
    if epochs == 0 {
        return Err(Error::invalid("T must be at least 1"));
    }
    let t = epochs as f64;
    Ok(6.0 * lipschitz * lipschitz / strong_concavity * (1.0 + t.ln()) / t)
}

/// Recovery error envelope `2C√(ελd)`.
pub fn recovery_error_envelope(epsilon: f64, dim: usize, smoothness: f64, constant: f64) -> Result<f64> {
    if !(epsilon >= 0.0 && smoothness >= 0.0 && constant >= 0.0) {
        return Err(Error::invalid("envelope inputs must be non-negative"));
    }
    Ok(2.0 * constant * (epsilon * smoothness * dim as f64).sqrt())
}
