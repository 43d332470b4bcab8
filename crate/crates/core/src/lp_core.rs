//! Dense revised simplex for standard-form linear programs
//! `min cᵀx  s.t.  Ax = b, x ≥ 0`.
//!
//! The basis inverse is held explicitly and updated with elementary row
//! operations after each pivot; it is rebuilt from an LU factorization every
//! `refactor_every` pivots to shed accumulated rounding. Pricing is Dantzig's
//! most-negative reduced cost. After a run of degenerate pivots the solver
//! switches to Bland's smallest-index rule until it makes progress again.
//! Phase 1 minimizes the sum of artificial variables.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::all_finite;

#[derive(Debug, Clone, PartialEq)]
pub struct StandardFormLp {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
}

impl StandardFormLp {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() || a.ncols() != c.len() {
            return Err(Error::DimensionMismatch(format!(
                "A is {}x{}, b has {}, c has {}",
                a.nrows(),
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        if !(all_finite(a.as_slice()) && all_finite(b.as_slice()) && all_finite(c.as_slice())) {
            return Err(Error::NonFinite("LP data".into()));
        }
        Ok(StandardFormLp { a, b, c })
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LpControls {
    pub max_iter: usize,
    /// Smallest admissible pivot magnitude.
    pub pivot_tol: f64,
    /// Primal feasibility tolerance.
    pub feas_tol: f64,
    /// Reduced-cost optimality tolerance.
    pub opt_tol: f64,
    pub refactor_every: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub degenerate_limit: usize,
}

impl Default for LpControls {
    fn default() -> Self {
        LpControls {
            max_iter: 100_000,
            pivot_tol: 1e-10,
            feas_tol: 1e-9,
            opt_tol: 1e-11,
            refactor_every: 50,
            degenerate_limit: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: DVector<f64>,
    /// Equality-constraint multipliers `y` with `Aᵀy ≤ c` at optimality.
    pub duals: DVector<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Result<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => Err(Error::LpStatus("infeasible")),
            LpOutcome::Unbounded => Err(Error::LpStatus("unbounded")),
        }
    }
}

pub fn solve_lp(lp: &StandardFormLp, controls: &LpControls) -> Result<LpOutcome> {
    let mut tab = Simplex::new(lp, controls);
    tab.two_phase()
}

/// Starts phase 2 from `basis` when it is primal feasible; otherwise falls
/// back to the two-phase method.
pub fn solve_lp_from_basis(
    lp: &StandardFormLp,
    basis: &[usize],
    controls: &LpControls,
) -> Result<LpOutcome> {
    if basis.len() != lp.rows() || basis.iter().any(|&j| j >= lp.cols()) {
        return Err(Error::invalid("starting basis has the wrong shape"));
    }
    let mut tab = Simplex::new(lp, controls);
    if tab.install_basis(basis) {
        tab.phase_two()
    } else {
        let mut tab = Simplex::new(lp, controls);
        tab.two_phase()
    }
}

enum Pass {
    Optimal,
    Unbounded,
}

struct Simplex<'a> {
    controls: &'a LpControls,
    m: usize,
    /// Number of structural columns; artificial column `n + i` is `e_i`.
    n: usize,
    /// Sparse columns of the row-sign-adjusted constraint matrix.
    cols: Vec<Vec<(usize, f64)>>,
    b: Vec<f64>,
    row_sign: Vec<f64>,
    c: Vec<f64>,
    cost: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    /// Row-major `m x m` basis inverse.
    binv: Vec<f64>,
    xb: Vec<f64>,
    allow_artificial_entry: bool,
    iterations: usize,
    since_refactor: usize,
}

impl<'a> Simplex<'a> {
    fn new(lp: &StandardFormLp, controls: &'a LpControls) -> Self {
        let (m, n) = (lp.rows(), lp.cols());
        let row_sign: Vec<f64> = lp.b.iter().map(|v| if *v < 0.0 { -1.0 } else { 1.0 }).collect();
        let mut cols = Vec::with_capacity(n + m);
        for j in 0..n {
            let col: Vec<(usize, f64)> = (0..m)
                .filter_map(|i| {
                    let v = lp.a[(i, j)];
                    (v != 0.0).then(|| (i, v * row_sign[i]))
                })
                .collect();
            cols.push(col);
        }
        for i in 0..m {
            cols.push(vec![(i, 1.0)]);
        }
        Simplex {
            controls,
            m,
            n,
            cols,
            b: lp.b.iter().zip(&row_sign).map(|(v, s)| v * s).collect(),
            row_sign,
            c: lp.c.iter().copied().collect(),
            cost: vec![0.0; n + m],
            basis: Vec::new(),
            is_basic: vec![false; n + m],
            binv: Vec::new(),
            xb: Vec::new(),
            allow_artificial_entry: true,
            iterations: 0,
            since_refactor: 0,
        }
    }

    fn two_phase(&mut self) -> Result<LpOutcome> {
        let (m, n) = (self.m, self.n);
        self.basis = (n..n + m).collect();
        self.is_basic = vec![false; n + m];
        for &j in &self.basis {
            self.is_basic[j] = true;
        }
        self.binv = identity(m);
        self.xb = self.b.clone();
        self.since_refactor = 0;

        self.cost = vec![0.0; n + m];
        for j in n..n + m {
            self.cost[j] = 1.0;
        }
        self.allow_artificial_entry = true;
        match self.iterate()? {
            Pass::Optimal => {}
            Pass::Unbounded => unreachable!("phase 1 objective is bounded below by zero"),
        }
        let infeasibility: f64 = self
            .basis
            .iter()
            .zip(&self.xb)
            .filter(|(j, _)| **j >= n)
            .map(|(_, v)| v.max(0.0))
            .sum();
        let scale = self.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if infeasibility > self.controls.feas_tol * scale {
            return Ok(LpOutcome::Infeasible);
        }
        self.drive_out_artificials();
        self.phase_two()
    }

    /// Installs a structural basis; returns false when it is singular or
    /// primal infeasible.
    fn install_basis(&mut self, basis: &[usize]) -> bool {
        self.basis = basis.to_vec();
        self.is_basic = vec![false; self.n + self.m];
        for &j in basis {
            if self.is_basic[j] {
                return false;
            }
            self.is_basic[j] = true;
        }
        if self.refactor().is_err() {
            return false;
        }
        let scale = self.b.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
        if self.xb.iter().any(|v| *v < -self.controls.feas_tol * scale) {
            return false;
        }
        for v in &mut self.xb {
            *v = v.max(0.0);
        }
        true
    }

    fn phase_two(&mut self) -> Result<LpOutcome> {
        let (m, n) = (self.m, self.n);
        self.cost = vec![0.0; n + m];
        self.cost[..n].copy_from_slice(&self.c);
        self.allow_artificial_entry = false;
        match self.iterate()? {
            Pass::Unbounded => Ok(LpOutcome::Unbounded),
            Pass::Optimal => {
                self.refactor()?;
                let mut x = DVector::zeros(n);
                for (pos, &j) in self.basis.iter().enumerate() {
                    if j < n {
                        x[j] = self.xb[pos].max(0.0);
                    }
                }
                let pi = self.duals();
                let duals = DVector::from_iterator(m, pi.iter().zip(&self.row_sign).map(|(p, s)| p * s));
                let objective = self.c.iter().zip(x.iter()).map(|(c, x)| c * x).sum();
                Ok(LpOutcome::Optimal(LpSolution {
                    x,
                    duals,
                    objective,
                    basis: self.basis.clone(),
                    iterations: self.iterations,
                }))
            }
        }
    }

    /// Pivots zero-level artificials out of the basis where a structural
    /// column can replace them. Remaining ones sit on redundant rows.
    fn drive_out_artificials(&mut self) {
        let n = self.n;
        for pos in 0..self.m {
            if self.basis[pos] < n {
                continue;
            }
            let row = &self.binv[pos * self.m..(pos + 1) * self.m];
            let mut best: Option<(usize, f64)> = None;
            for j in 0..n {
                if self.is_basic[j] {
                    continue;
                }
                let u: f64 = self.cols[j].iter().map(|(r, a)| row[*r] * a).sum();
                if u.abs() > self.controls.pivot_tol && best.is_none_or(|(_, b)| u.abs() > b.abs()) {
                    best = Some((j, u));
                }
            }
            if let Some((j, _)) = best {
                let u = self.column_in_basis(j);
                self.pivot(pos, j, &u, 0.0);
            }
        }
    }

    fn iterate(&mut self) -> Result<Pass> {
        let mut degenerate_run = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.controls.max_iter {
                return Err(Error::IterationLimit {
                    iterations: self.iterations,
                    basis: self.basis.clone(),
                });
            }
            if self.since_refactor >= self.controls.refactor_every {
                self.refactor()?;
            }
            let pi = self.duals();
            let Some(entering) = self.price(&pi, bland) else {
                return Ok(Pass::Optimal);
            };
            let u = self.column_in_basis(entering);
            let Some((leave, step)) = self.ratio_test(&u, bland) else {
                return Ok(Pass::Unbounded);
            };
            if step <= 1e-12 {
                degenerate_run += 1;
                if degenerate_run >= self.controls.degenerate_limit {
                    bland = true;
                }
            } else {
                degenerate_run = 0;
                bland = false;
            }
            self.pivot(leave, entering, &u, step);
            self.iterations += 1;
        }
    }

    fn duals(&self) -> Vec<f64> {
        let m = self.m;
        let mut pi = vec![0.0; m];
        for (pos, &j) in self.basis.iter().enumerate() {
            let cb = self.cost[j];
            if cb != 0.0 {
                let row = &self.binv[pos * m..(pos + 1) * m];
                for (p, r) in pi.iter_mut().zip(row) {
                    *p += cb * r;
                }
            }
        }
        pi
    }

    fn price(&self, pi: &[f64], bland: bool) -> Option<usize> {
        let limit = if self.allow_artificial_entry { self.n + self.m } else { self.n };
        let mut best: Option<(usize, f64)> = None;
        for j in 0..limit {
            if self.is_basic[j] {
                continue;
            }
            let d = self.cost[j] - self.cols[j].iter().map(|(r, a)| pi[*r] * a).sum::<f64>();
            if d < -self.controls.opt_tol {
                if bland {
                    return Some(j);
                }
                if best.is_none_or(|(_, b)| d < b) {
                    best = Some((j, d));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    fn column_in_basis(&self, j: usize) -> Vec<f64> {
        let m = self.m;
        let mut u = vec![0.0; m];
        for &(r, a) in &self.cols[j] {
            for (i, ui) in u.iter_mut().enumerate() {
                *ui += self.binv[i * m + r] * a;
            }
        }
        u
    }

    fn ratio_test(&self, u: &[f64], bland: bool) -> Option<(usize, f64)> {
        let tol = self.controls.pivot_tol;
        let mut best: Option<(usize, f64)> = None;
        for (i, &ui) in u.iter().enumerate() {
            let artificial_stuck = !self.allow_artificial_entry && self.basis[i] >= self.n;
            let ratio = if artificial_stuck && ui.abs() > tol {
                0.0
            } else if ui > tol {
                self.xb[i].max(0.0) / ui
            } else {
                continue;
            };
            best = match best {
                None => Some((i, ratio)),
                Some((bi, br)) => {
                    let tie = (ratio - br).abs() <= 1e-12 * (1.0 + br.abs());
                    let better = if tie {
                        if bland {
                            self.basis[i] < self.basis[bi]
                        } else {
                            ui.abs() > u[bi].abs()
                        }
                    } else {
                        ratio < br
                    };
                    if better { Some((i, ratio)) } else { Some((bi, br)) }
                }
            };
        }
        best
    }

    fn pivot(&mut self, leave: usize, entering: usize, u: &[f64], step: f64) {
        let m = self.m;
        let piv = u[leave];
        for (i, &ui) in u.iter().enumerate() {
            if i != leave {
                self.xb[i] -= ui * step;
                if self.xb[i] < 0.0 && self.xb[i] > -self.controls.feas_tol {
                    self.xb[i] = 0.0;
                }
            }
        }
        self.xb[leave] = step;
        let (before, rest) = self.binv.split_at_mut(leave * m);
        let (pivot_row, after) = rest.split_at_mut(m);
        for v in pivot_row.iter_mut() {
            *v /= piv;
        }
        for (i, row) in before.chunks_mut(m).chain(after.chunks_mut(m)).enumerate() {
            let ui = if i < leave { u[i] } else { u[i + 1] };
            if ui != 0.0 {
                for (r, p) in row.iter_mut().zip(pivot_row.iter()) {
                    *r -= ui * p;
                }
            }
        }
        self.is_basic[self.basis[leave]] = false;
        self.is_basic[entering] = true;
        self.basis[leave] = entering;
        self.since_refactor += 1;
    }

    fn refactor(&mut self) -> Result<()> {
        let m = self.m;
        let mut bmat = DMatrix::<f64>::zeros(m, m);
        for (pos, &j) in self.basis.iter().enumerate() {
            for &(r, a) in &self.cols[j] {
                bmat[(r, pos)] = a;
            }
        }
        let inv = bmat
            .lu()
            .try_inverse()
            .ok_or_else(|| Error::Singular("simplex basis became singular".into()))?;
        self.binv = (0..m * m).map(|k| inv[(k / m, k % m)]).collect();
        self.xb = (0..m)
            .map(|i| (0..m).map(|r| self.binv[i * m + r] * self.b[r]).sum())
            .collect();
        self.since_refactor = 0;
        Ok(())
    }
}

fn identity(m: usize) -> Vec<f64> {
    let mut v = vec![0.0; m * m];
    for i in 0..m {
        v[i * m + i] = 1.0;
    }
    v
}
