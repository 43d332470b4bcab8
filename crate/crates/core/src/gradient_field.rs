//! Local gradient-field learning.
//!
//! From one epoch's `k + 1` evaluated points, a gradient is regressed at every
//! point by treating it as the base and the remaining points as its
//! perturbations. The resulting sparse field is interpolated with the
//! separable matrix-valued kernel `K(x, y) = exp(-γ|x - y|²)·I_d` and the
//! iterate follows the interpolated field by explicit Euler steps.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimators::build_rbo_problem;
use crate::linalg::{all_finite, median, squared_distance};
use crate::regression::{solve, RegressionSpec};

const DISTINCT_TOL: f64 = 1e-12;

/// Default ridge term `kernel_reg` in `(K + kernel_reg·N·I) c = y`.
pub const DEFAULT_KERNEL_REG: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseGradientField {
    anchors: Vec<DVector<f64>>,
    gradients: Vec<DVector<f64>>,
}

impl SparseGradientField {
    pub fn new(anchors: Vec<DVector<f64>>, gradients: Vec<DVector<f64>>) -> Result<Self> {
        if anchors.len() != gradients.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} anchors but {} gradients",
                anchors.len(),
                gradients.len()
            )));
        }
        if anchors.is_empty() {
            return Err(Error::invalid("a gradient field needs at least one anchor"));
        }
        let dim = anchors[0].len();
        if anchors.iter().chain(gradients.iter()).any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch("anchors and gradients must share one dimension".into()));
        }
        if gradients.iter().any(|g| !all_finite(g.as_slice())) {
            return Err(Error::NonFinite("anchored gradient".into()));
        }
        for i in 0..anchors.len() {
            for j in 0..i {
                if squared_distance(&anchors[i], &anchors[j]).sqrt() <= DISTINCT_TOL {
                    return Err(Error::invalid(format!("anchors {j} and {i} coincide")));
                }
            }
        }
        Ok(SparseGradientField { anchors, gradients })
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].len()
    }

    pub fn anchors(&self) -> &[DVector<f64>] {
        &self.anchors
    }

    pub fn gradients(&self) -> &[DVector<f64>] {
        &self.gradients
    }
}

/// Regresses a gradient at each of `points`, using the other points as its
/// perturbations. No objective evaluations happen here.
pub fn reconstruct_field(points: &[DVector<f64>], values: &[f64], spec: &RegressionSpec) -> Result<SparseGradientField> {
    if points.len() != values.len() {
        return Err(Error::DimensionMismatch("points and values differ in length".into()));
    }
    if points.len() < 2 {
        return Err(Error::invalid("field reconstruction needs at least two points"));
    }
    let gradients: Vec<DVector<f64>> = (0..points.len())
        .into_par_iter()
        .map(|base| {
            let others: Vec<(DVector<f64>, f64)> = points
                .iter()
                .zip(values)
                .enumerate()
                .filter(|(j, _)| *j != base)
                .map(|(_, (p, v))| (p - &points[base], *v))
                .collect();
            build_rbo_problem(values[base], &others, &[])
                .and_then(|prob| solve(&prob, spec))
                .map_err(|e| Error::Anchor {
                    anchor: base,
                    source: Box::new(e),
                })
        })
        .collect::<Result<_>>()?;
    SparseGradientField::new(points.to_vec(), gradients)
}

/// `γ = 1 / (2·median pairwise squared distance)`; 1 when undefined.
pub fn default_gamma(anchors: &[DVector<f64>]) -> f64 {
    let mut d2: Vec<f64> = Vec::new();
    for i in 0..anchors.len() {
        for j in 0..i {
            d2.push(squared_distance(&anchors[i], &anchors[j]));
        }
    }
    if d2.is_empty() {
        return 1.0;
    }
    let med = median(&mut d2);
    if med > 0.0 { 1.0 / (2.0 * med) } else { 1.0 }
}

pub fn rbf(gamma: f64, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (-gamma * squared_distance(x, y)).exp()
}

/// Interpolated field `x ↦ Σ_i k(x_i, x)·c_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub gamma: f64,
    pub kernel_reg: f64,
    pub anchors: Vec<DVector<f64>>,
    pub coefficients: Vec<DVector<f64>>,
}

fn check_kernel_params(gamma: f64, kernel_reg: f64) -> Result<()> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid("RBF bandwidth γ must be positive"));
    }
    if !(kernel_reg >= 0.0 && kernel_reg.is_finite()) {
        return Err(Error::invalid("kernel_reg must be non-negative"));
    }
    Ok(())
}

fn gram(anchors: &[DVector<f64>], gamma: f64) -> DMatrix<f64> {
    let n = anchors.len();
    DMatrix::from_fn(n, n, |i, j| rbf(gamma, &anchors[i], &anchors[j]))
}

fn singular(kernel_reg: f64) -> Error {
    if kernel_reg == 0.0 {
        Error::Singular("kernel system is singular at kernel_reg = 0; use kernel_reg > 0".into())
    } else {
        Error::Singular("kernel system is singular".into())
    }
}

/// Fits the coefficients with `B = I`, which decouples the `Nd x Nd` system
/// into `d` scalar-kernel solves sharing one `N x N` matrix.
pub fn fit_kernel_field(field: &SparseGradientField, gamma: f64, kernel_reg: f64) -> Result<KernelField> {
    check_kernel_params(gamma, kernel_reg)?;
    let n = field.len();
    let d = field.dim();
    let system = gram(field.anchors(), gamma) + DMatrix::identity(n, n) * (kernel_reg * n as f64);
    let targets = DMatrix::from_fn(n, d, |i, j| field.gradients()[i][j]);
    let coeffs = match system.clone().cholesky() {
        Some(chol) => chol.solve(&targets),
        None => system.lu().solve(&targets).ok_or_else(|| singular(kernel_reg))?,
    };
    if !all_finite(coeffs.as_slice()) {
        return Err(singular(kernel_reg));
    }
    Ok(KernelField {
        gamma,
        kernel_reg,
        anchors: field.anchors().to_vec(),
        coefficients: (0..n).map(|i| coeffs.row(i).transpose()).collect(),
    })
}

/// Solves the full block system `(K(X, X) ⊗ I_d + kernel_reg·N·I_{Nd}) c = y`.
/// Kept as the reference route for the decoupled solver.
pub fn fit_kernel_field_block(field: &SparseGradientField, gamma: f64, kernel_reg: f64) -> Result<KernelField> {
    check_kernel_params(gamma, kernel_reg)?;
    let n = field.len();
    let d = field.dim();
    let k = gram(field.anchors(), gamma);
    let mut system = DMatrix::zeros(n * d, n * d);
    for i in 0..n {
        for j in 0..n {
            for a in 0..d {
                system[(i * d + a, j * d + a)] = k[(i, j)];
            }
        }
    }
    system += DMatrix::identity(n * d, n * d) * (kernel_reg * n as f64);
    let y = DVector::from_iterator(n * d, field.gradients().iter().flat_map(|g| g.iter().copied()));
    let c = system.lu().solve(&y).ok_or_else(|| singular(kernel_reg))?;
    if !all_finite(c.as_slice()) {
        return Err(singular(kernel_reg));
    }
    Ok(KernelField {
        gamma,
        kernel_reg,
        anchors: field.anchors().to_vec(),
        coefficients: (0..n).map(|i| c.rows(i * d, d).into_owned()).collect(),
    })
}

impl KernelField {
    /// Largest row residual of `(K + kernel_reg·N·I) c - y` against `field`.
    pub fn residual(&self, field: &SparseGradientField) -> f64 {
        let n = self.anchors.len();
        (0..n)
            .map(|i| {
                let mut acc = &self.coefficients[i] * (self.kernel_reg * n as f64);
                for j in 0..n {
                    acc += &self.coefficients[j] * rbf(self.gamma, &self.anchors[i], &self.anchors[j]);
                }
                (acc - &field.gradients()[i]).norm()
            })
            .fold(0.0, f64::max)
    }
}

pub fn evaluate_field(kf: &KernelField, x: &DVector<f64>) -> DVector<f64> {
    let mut out = DVector::zeros(x.len());
    for (anchor, c) in kf.anchors.iter().zip(&kf.coefficients) {
        out.axpy(rbf(kf.gamma, anchor, x), c, 1.0);
    }
    out
}

/// `n_steps` explicit Euler steps of `dθ/dt = field(θ)` with step `h`.
pub fn flow_update(kf: &KernelField, theta: &DVector<f64>, step: f64, n_steps: usize) -> Result<DVector<f64>> {
    if !(step > 0.0 && step.is_finite()) || n_steps == 0 {
        return Err(Error::invalid("flow needs h > 0 and at least one step"));
    }
    let mut x = theta.clone();
    for s in 0..n_steps {
        let v = evaluate_field(kf, &x);
        if !all_finite(v.as_slice()) {
            return Err(Error::NonFinite(format!("gradient field at Euler step {s}")));
        }
        x.axpy(step, &v, 1.0);
    }
    Ok(x)
}
