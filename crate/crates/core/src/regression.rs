//! Regularized regression solvers for gradient recovery:
//!
//! ```text
//! argmin_v  (1/2k) |y - Z v|_p^p + α |v|_q^q
//! ```
//!
//! Four instantiations are supported: ridge `(2, 2, α > 0)`, Lasso
//! `(2, 1, α > 0)`, LP decoding `(1, ·, α = 0)` and L1-ridge `(1, 2, α > 0)`.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, solve_spd_vec};
use crate::lp_core::{solve_lp_from_basis, LpControls, StandardFormLp};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverControls {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for SolverControls {
    fn default() -> Self {
        SolverControls {
            max_iter: 100_000,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegressionMode {
    Ridge { alpha: f64 },
    Lasso { alpha: f64 },
    LpDecoding,
    L1Ridge { alpha: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionSpec {
    pub mode: RegressionMode,
    pub controls: SolverControls,
}

const SUPPORTED: &str =
    "supported modes are ridge (p=2,q=2,α>0), lasso (p=2,q=1,α>0), lp decoding (p=1,α=0) and l1ridge (p=1,q=2,α>0)";

impl RegressionSpec {
    /// Validates a `(p, q, α)` triple against the supported instantiations.
    pub fn from_pqa(p: u32, q: u32, alpha: f64) -> Result<Self> {
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("α must be finite and non-negative; {SUPPORTED}")));
        }
        let mode = match (p, q) {
            (1, 1 | 2) if alpha == 0.0 => RegressionMode::LpDecoding,
            (2, 2) if alpha > 0.0 => RegressionMode::Ridge { alpha },
            (2, 1) if alpha > 0.0 => RegressionMode::Lasso { alpha },
            (1, 2) => RegressionMode::L1Ridge { alpha },
            _ => {
                return Err(Error::invalid(format!(
                    "unsupported regression (p={p}, q={q}, α={alpha}); {SUPPORTED}"
                )))
            }
        };
        Ok(RegressionSpec {
            mode,
            controls: SolverControls::default(),
        })
    }

    pub fn ridge(alpha: f64) -> Result<Self> {
        Self::from_pqa(2, 2, alpha)
    }

    pub fn lasso(alpha: f64) -> Result<Self> {
        Self::from_pqa(2, 1, alpha)
    }

    pub fn lp() -> Self {
        RegressionSpec {
            mode: RegressionMode::LpDecoding,
            controls: SolverControls::default(),
        }
    }

    pub fn l1_ridge(alpha: f64) -> Result<Self> {
        if alpha == 0.0 {
            return Err(Error::invalid("l1ridge needs α > 0; use lp for α = 0"));
        }
        Self::from_pqa(1, 2, alpha)
    }

    /// Parses a CLI regressor name (`ridge|lasso|lp|l1ridge`) with its α.
    pub fn from_name(name: &str, alpha: f64) -> Result<Self> {
        match name {
            "ridge" => Self::ridge(alpha),
            "lasso" => Self::lasso(alpha),
            "lp" => Ok(Self::lp()),
            "l1ridge" => Self::l1_ridge(alpha),
            other => Err(Error::invalid(format!("unknown regressor `{other}`; {SUPPORTED}"))),
        }
    }

    pub fn with_controls(mut self, controls: SolverControls) -> Self {
        self.controls = controls;
        self
    }

    pub fn p(&self) -> u32 {
        match self.mode {
            RegressionMode::Ridge { .. } | RegressionMode::Lasso { .. } => 2,
            RegressionMode::LpDecoding | RegressionMode::L1Ridge { .. } => 1,
        }
    }

    pub fn q(&self) -> u32 {
        match self.mode {
            RegressionMode::Lasso { .. } => 1,
            _ => 2,
        }
    }

    pub fn alpha(&self) -> f64 {
        match self.mode {
            RegressionMode::Ridge { alpha }
            | RegressionMode::Lasso { alpha }
            | RegressionMode::L1Ridge { alpha } => alpha,
            RegressionMode::LpDecoding => 0.0,
        }
    }

    pub fn name(&self) -> &'static str {
        match self.mode {
            RegressionMode::Ridge { .. } => "ridge",
            RegressionMode::Lasso { .. } => "lasso",
            RegressionMode::LpDecoding => "lp",
            RegressionMode::L1Ridge { .. } => "l1ridge",
        }
    }
}

impl fmt::Display for RegressionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.mode {
            RegressionMode::LpDecoding => f.write_str("lp"),
            _ => write!(f, "{}(alpha={})", self.name(), self.alpha()),
        }
    }
}

/// Displacement matrix `Z` (k x d) and value differences `y` (length k).
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionProblem {
    pub z: DMatrix<f64>,
    pub y: DVector<f64>,
}

impl RegressionProblem {
    pub fn new(z: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if z.nrows() != y.len() {
            return Err(Error::DimensionMismatch(format!(
                "Z has {} rows but y has {} entries",
                z.nrows(),
                y.len()
            )));
        }
        if z.ncols() == 0 {
            return Err(Error::invalid("regression needs d >= 1"));
        }
        if !(all_finite(z.as_slice()) && all_finite(y.as_slice())) {
            return Err(Error::NonFinite("regression data".into()));
        }
        Ok(RegressionProblem { z, y })
    }

    pub fn rows(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn residual(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.y - &self.z * v
    }

    /// `(1/2k)|y - Zv|_p^p + α|v|_q^q` for the given spec.
    pub fn objective(&self, spec: &RegressionSpec, v: &DVector<f64>) -> f64 {
        let k = self.rows().max(1) as f64;
        let r = self.residual(v);
        let loss = match spec.p() {
            1 => r.iter().map(|x| x.abs()).sum::<f64>(),
            _ => r.norm_squared(),
        };
        let penalty = match spec.q() {
            1 => v.iter().map(|x| x.abs()).sum::<f64>(),
            _ => v.norm_squared(),
        };
        loss / (2.0 * k) + spec.alpha() * penalty
    }
}

/// Closed form `(ZᵀZ + 2kα I)⁻¹ Zᵀ y`.
pub fn solve_ridge(prob: &RegressionProblem, alpha: f64) -> Result<DVector<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("ridge requires α > 0"));
    }
    let k = prob.rows() as f64;
    let d = prob.dim();
    let gram = prob.z.transpose() * &prob.z + DMatrix::identity(d, d) * (2.0 * k * alpha);
    let rhs = prob.z.transpose() * &prob.y;
    solve_spd_vec(gram, &rhs)
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

/// Largest violation of the Lasso subgradient optimality conditions.
pub fn lasso_kkt_violation(prob: &RegressionProblem, alpha: f64, v: &DVector<f64>) -> f64 {
    let k = prob.rows() as f64;
    let grad = prob.z.transpose() * (&prob.z * v - &prob.y) / k;
    grad.iter()
        .zip(v.iter())
        .map(|(g, vj)| {
            if *vj != 0.0 {
                (g + alpha * vj.signum()).abs()
            } else {
                (g.abs() - alpha).max(0.0)
            }
        })
        .fold(0.0, f64::max)
}

/// Cyclic coordinate descent with soft-thresholding.
pub fn solve_lasso(prob: &RegressionProblem, alpha: f64, controls: &SolverControls) -> Result<DVector<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("lasso requires α > 0"));
    }
    let k = prob.rows() as f64;
    let d = prob.dim();
    let col_sq: Vec<f64> = (0..d).map(|j| prob.z.column(j).norm_squared() / k).collect();
    let mut v = DVector::zeros(d);
    let mut r = prob.y.clone();
    for sweep in 0..controls.max_iter {
        if sweep % 64 == 63 {
            // Refresh the running residual against drift.
            r = prob.residual(&v);
        }
        let mut max_change = 0.0f64;
        for j in 0..d {
            if col_sq[j] == 0.0 {
                v[j] = 0.0;
                continue;
            }
            let col = prob.z.column(j);
            let rho = col.dot(&r) / k + col_sq[j] * v[j];
            let updated = soft_threshold(rho, alpha) / col_sq[j];
            let delta = updated - v[j];
            if delta != 0.0 {
                r.axpy(-delta, &col, 1.0);
                v[j] = updated;
                max_change = max_change.max(delta.abs());
            }
        }
        if max_change < controls.tol {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        solver: "lasso coordinate descent",
        iterations: controls.max_iter,
        violation: lasso_kkt_violation(prob, alpha, &v),
        last_iterate: v.as_slice().to_vec(),
    })
}

/// The L1 regression LP `min 1ᵀ(r⁺ + r⁻)` s.t. `Z(v⁺ - v⁻) + r⁺ - r⁻ = y`.
///
/// Columns of `Z` are rescaled to unit max-norm before the solve, which leaves
/// the L1 objective unchanged.
pub fn solve_lp_decoding(prob: &RegressionProblem, controls: &SolverControls) -> Result<DVector<f64>> {
    let (k, d) = (prob.rows(), prob.dim());
    if k == 0 {
        return Err(Error::invalid("LP decoding needs at least one measurement"));
    }
    let scales: Vec<f64> = (0..d)
        .map(|j| {
            let s = prob.z.column(j).amax();
            if s > 0.0 { s } else { 1.0 }
        })
        .collect();
    let n = 2 * d + 2 * k;
    let mut a = DMatrix::zeros(k, n);
    for j in 0..d {
        for i in 0..k {
            let zij = prob.z[(i, j)] / scales[j];
            a[(i, j)] = zij;
            a[(i, d + j)] = -zij;
        }
    }
    for i in 0..k {
        a[(i, 2 * d + i)] = 1.0;
        a[(i, 2 * d + k + i)] = -1.0;
    }
    let mut c = DVector::zeros(n);
    c.rows_mut(2 * d, 2 * k).fill(1.0);
    // Residual slacks give a feasible diagonal starting basis.
    let basis: Vec<usize> = (0..k)
        .map(|i| if prob.y[i] >= 0.0 { 2 * d + i } else { 2 * d + k + i })
        .collect();
    let lp = StandardFormLp::new(a, prob.y.clone(), c)?;
    let lp_controls = LpControls {
        max_iter: controls.max_iter,
        ..LpControls::default()
    };
    let sol = solve_lp_from_basis(&lp, &basis, &lp_controls)?.optimal()?;
    Ok(DVector::from_fn(d, |j, _| (sol.x[j] - sol.x[d + j]) / scales[j]))
}

/// `(1/2k)|y - Zv|₁ + α|v|₂²` through its box-constrained dual
///
/// ```text
/// max_w  wᵀy - |Zᵀw|² / (4α)   s.t.  |w|_∞ ≤ 1/(2k),    v = Zᵀw / (2α)
/// ```
///
/// solved by exact coordinate ascent and stopped on the duality gap.
pub fn solve_l1_ridge(prob: &RegressionProblem, alpha: f64, controls: &SolverControls) -> Result<DVector<f64>> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid("l1ridge requires α > 0"));
    }
    let k = prob.rows();
    let bound = 1.0 / (2.0 * k as f64);
    let row_sq: Vec<f64> = (0..k).map(|i| prob.z.row(i).norm_squared()).collect();
    let mut w = DVector::<f64>::zeros(k);
    let mut u = DVector::<f64>::zeros(prob.dim());
    let spec = RegressionSpec {
        mode: RegressionMode::L1Ridge { alpha },
        controls: *controls,
    };
    let mut gap = f64::INFINITY;
    for sweep in 0..controls.max_iter {
        for i in 0..k {
            let zi = prob.z.row(i);
            let target = if row_sq[i] == 0.0 {
                bound * prob.y[i].signum()
            } else {
                let slope = prob.y[i] - zi.dot(&u.transpose()) / (2.0 * alpha);
                w[i] + slope * 2.0 * alpha / row_sq[i]
            };
            let updated = target.clamp(-bound, bound);
            let delta = updated - w[i];
            if delta != 0.0 {
                u.axpy(delta, &zi.transpose(), 1.0);
                w[i] = updated;
            }
        }
        if sweep % 64 == 63 {
            u = prob.z.transpose() * &w;
        }
        let v = &u / (2.0 * alpha);
        let primal = prob.objective(&spec, &v);
        let dual = w.dot(&prob.y) - u.norm_squared() / (4.0 * alpha);
        gap = primal - dual;
        if gap <= controls.tol * primal.abs().max(1.0) {
            return Ok(v);
        }
    }
    Err(Error::NotConverged {
        solver: "l1ridge dual coordinate ascent",
        iterations: controls.max_iter,
        violation: gap,
        last_iterate: (&u / (2.0 * alpha)).as_slice().to_vec(),
    })
}

pub fn solve(prob: &RegressionProblem, spec: &RegressionSpec) -> Result<DVector<f64>> {
    match spec.mode {
        RegressionMode::Ridge { alpha } => solve_ridge(prob, alpha),
        RegressionMode::Lasso { alpha } => solve_lasso(prob, alpha, &spec.controls),
        RegressionMode::LpDecoding => solve_lp_decoding(prob, &spec.controls),
        RegressionMode::L1Ridge { alpha } => solve_l1_ridge(prob, alpha, &spec.controls),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn problem(rows: usize, cols: usize, z: &[f64], y: &[f64]) -> RegressionProblem {
        RegressionProblem::new(DMatrix::from_row_slice(rows, cols, z), DVector::from_column_slice(y)).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert!(matches!(RegressionSpec::from_pqa(2, 2, 0.1).unwrap().mode, RegressionMode::Ridge { .. }));
        assert!(matches!(RegressionSpec::from_pqa(2, 1, 0.1).unwrap().mode, RegressionMode::Lasso { .. }));
        assert!(matches!(RegressionSpec::from_pqa(1, 1, 0.0).unwrap().mode, RegressionMode::LpDecoding));
        assert!(matches!(RegressionSpec::from_pqa(1, 2, 0.0).unwrap().mode, RegressionMode::LpDecoding));
        assert!(matches!(RegressionSpec::from_pqa(1, 2, 0.3).unwrap().mode, RegressionMode::L1Ridge { .. }));
        for (p, q, a) in [(2, 2, 0.0), (2, 1, 0.0), (1, 1, 0.5), (3, 2, 1.0), (2, 2, -1.0)] {
            let err = RegressionSpec::from_pqa(p, q, a).unwrap_err();
            assert!(err.to_string().contains("ridge"), "{err}");
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(RegressionProblem::new(DMatrix::zeros(3, 2), DVector::zeros(2)).is_err());
        assert!(RegressionProblem::new(DMatrix::from_element(1, 1, f64::NAN), DVector::zeros(1)).is_err());
    }

    #[test]
    fn ridge_scalar_least_squares_limit() {
        let v = solve_ridge(&problem(1, 1, &[1.0], &[2.0]), 1e-12).unwrap();
        assert_relative_eq!(v[0], 2.0, epsilon = 1e-9);
    }

    #[test]
    fn ridge_orthogonal_shrinkage() {
        let sigma: f64 = 0.1;
        let s = sigma * 2f64.sqrt();
        let a = DVector::from_vec(vec![1.0, -1.0]);
        let z = DMatrix::identity(2, 2) * s;
        let y = z.transpose() * &a;
        let v = solve_ridge(&RegressionProblem::new(z, y).unwrap(), 0.05).unwrap();
        let shrink = 0.01 / 0.11;
        assert_relative_eq!(v, a * shrink, epsilon = 1e-14);
    }

    #[test]
    fn ridge_rejects_nonpositive_alpha() {
        assert!(solve_ridge(&problem(1, 1, &[1.0], &[1.0]), 0.0).is_err());
    }

    #[test]
    fn lasso_full_shrinkage_threshold() {
        let p = problem(3, 2, &[1.0, 0.5, -1.0, 2.0, 0.3, 0.1], &[1.0, -2.0, 0.5]);
        let threshold = (p.z.transpose() * &p.y).amax() / 3.0;
        let v = solve_lasso(&p, threshold * 1.0001, &SolverControls::default()).unwrap();
        assert_eq!(v, DVector::zeros(2));
    }

    #[test]
    fn lasso_scalar_hand_solution() {
        let v = solve_lasso(&problem(2, 1, &[1.0, 1.0], &[1.0, 1.0]), 0.5, &SolverControls::default()).unwrap();
        assert_relative_eq!(v[0], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn lasso_reports_non_convergence() {
        let p = problem(3, 2, &[1.0, 0.99, 1.0, 1.01, 1.0, 1.0], &[1.0, 2.0, 3.0]);
        let err = solve_lasso(&p, 1e-3, &SolverControls { max_iter: 1, tol: 1e-14 }).unwrap_err();
        match err {
            Error::NotConverged { last_iterate, violation, .. } => {
                assert_eq!(last_iterate.len(), 2);
                assert!(violation > 0.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lp_decoding_ignores_outlier() {
        let v = solve_lp_decoding(&problem(3, 1, &[1.0, 1.0, 1.0], &[3.0, 3.0, 100.0]), &SolverControls::default()).unwrap();
        assert_relative_eq!(v[0], 3.0, epsilon = 1e-12);
    }

    #[test]
    fn l1_ridge_scalar_case() {
        // (1/4)(|1-v| + |1-v|) + 0.1 v²: slope -1/2 + 0.2 v < 0 on [0, 1), minimized at the kink v = 1.
        let v = solve_l1_ridge(&problem(2, 1, &[1.0, 1.0], &[1.0, 1.0]), 0.1, &SolverControls::default()).unwrap();
        assert_relative_eq!(v[0], 1.0, epsilon = 1e-6);
        // With α = 1 the quadratic wins: -1/2 + 2v = 0 at v = 1/4.
        let v = solve_l1_ridge(&problem(2, 1, &[1.0, 1.0], &[1.0, 1.0]), 1.0, &SolverControls::default()).unwrap();
        assert_relative_eq!(v[0], 0.25, epsilon = 1e-9);
    }

    #[test]
    fn dispatch_matches_direct_solvers() {
        let p = problem(4, 2, &[1.0, 0.2, -0.3, 1.0, 0.5, 0.5, 2.0, -1.0], &[1.0, 0.4, -0.7, 2.2]);
        assert_eq!(solve(&p, &RegressionSpec::ridge(0.1).unwrap()).unwrap(), solve_ridge(&p, 0.1).unwrap());
        assert_eq!(
            solve(&p, &RegressionSpec::lp()).unwrap(),
            solve_lp_decoding(&p, &SolverControls::default()).unwrap()
        );
        assert_eq!(
            solve(&p, &RegressionSpec::lasso(0.05).unwrap()).unwrap(),
            solve_lasso(&p, 0.05, &SolverControls::default()).unwrap()
        );
    }

    #[test]
    fn names_round_trip() {
        for name in ["ridge", "lasso", "lp", "l1ridge"] {
            assert_eq!(RegressionSpec::from_name(name, 0.1).unwrap().name(), name);
        }
        assert!(RegressionSpec::from_name("huber", 0.1).is_err());
    }
}
