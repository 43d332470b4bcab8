//! Independent reference solvers used to check the production solvers.

use nalgebra::{DMatrix, DVector};

/// `(1/2k)|y - Zv|₁`
pub fn l1_objective(z: &DMatrix<f64>, y: &DVector<f64>, v: &DVector<f64>) -> f64 {
    (y - z * v).iter().map(|r| r.abs()).sum::<f64>() / (2.0 * z.nrows() as f64)
}

fn solve_rows(z: &DMatrix<f64>, y: &DVector<f64>, rows: &[usize]) -> Option<DVector<f64>> {
    let d = z.ncols();
    let a = DMatrix::from_fn(d, d, |i, j| z[(rows[i], j)]);
    let b = DVector::from_fn(d, |i, _| y[rows[i]]);
    let v = a.lu().solve(&b)?;
    v.iter().all(|x| x.is_finite()).then_some(v)
}

/// Minimizes `(1/2k)|y - Zv|₁` without linear programming: a subgradient
/// phase finds the neighbourhood of the optimum, the `d` rows with the
/// smallest residuals define a vertex, and single row swaps are applied
/// while they lower the objective. For a full-rank `Z` in general position a
/// vertex with no improving swap is a global minimizer.
pub fn l1_regression_oracle(z: &DMatrix<f64>, y: &DVector<f64>, subgradient_iters: usize) -> (DVector<f64>, f64) {
    let (k, d) = (z.nrows(), z.ncols());
    let mut v = (z.transpose() * z)
        .lu()
        .solve(&(z.transpose() * y))
        .unwrap_or_else(|| DVector::zeros(d));
    let mut best = v.clone();
    let mut best_obj = l1_objective(z, y, &v);
    let scale = z.norm() / (k as f64).sqrt();
    for i in 1..=subgradient_iters {
        let r = y - z * &v;
        let sign = r.map(|x| if x > 0.0 { 1.0 } else if x < 0.0 { -1.0 } else { 0.0 });
        let g = -(z.transpose() * sign) / (2.0 * k as f64);
        let gn = g.norm();
        if gn == 0.0 {
            break;
        }
        let step = 1.0 / (scale * (i as f64).sqrt());
        v -= g * (step / gn);
        let obj = l1_objective(z, y, &v);
        if obj < best_obj {
            best_obj = obj;
            best = v.clone();
        }
    }
    if k < d {
        return (best, best_obj);
    }

    let r = y - z * &best;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| r[a].abs().total_cmp(&r[b].abs()));
    let mut active: Vec<usize> = order[..d].to_vec();
    if let Some(vertex) = solve_rows(z, y, &active) {
        let obj = l1_objective(z, y, &vertex);
        if obj <= best_obj {
            best = vertex;
            best_obj = obj;
        }
    }
    loop {
        let mut improved = false;
        'search: for slot in 0..d {
            for candidate in 0..k {
                if active.contains(&candidate) {
                    continue;
                }
                let mut trial = active.clone();
                trial[slot] = candidate;
                if let Some(vertex) = solve_rows(z, y, &trial) {
                    let obj = l1_objective(z, y, &vertex);
                    if obj < best_obj - 1e-15 * best_obj.abs().max(1.0) {
                        best_obj = obj;
                        best = vertex;
                        active = trial;
                        improved = true;
                        break 'search;
                    }
                }
            }
        }
        if !improved {
            return (best, best_obj);
        }
    }
}

/// Plain proximal gradient (ISTA) for the Lasso with step `1/L`.
pub fn lasso_ista(z: &DMatrix<f64>, y: &DVector<f64>, alpha: f64, iters: usize) -> DVector<f64> {
    let k = z.nrows() as f64;
    let lip = (z.transpose() * z).symmetric_eigenvalues().max() / k;
    let step = 1.0 / lip;
    let mut v = DVector::zeros(z.ncols());
    for _ in 0..iters {
        let grad = z.transpose() * (z * &v - y) / k;
        v = (&v - grad * step).map(|x| {
            let t = alpha * step;
            if x > t { x - t } else if x < -t { x + t } else { 0.0 }
        });
    }
    v
}
