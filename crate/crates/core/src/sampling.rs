//! Perturbation direction ensembles.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, StreamTag};

/// Pivot norm below which a Gram-Schmidt step is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;
const MAX_REDRAWS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    IidGaussian,
    /// Gram-Schmidt orthogonalized Gaussian rows renormalized to length √d.
    Orthogonal,
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SamplerKind::IidGaussian => "iid",
            SamplerKind::Orthogonal => "orthogonal",
        })
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "iid" => Ok(SamplerKind::IidGaussian),
            "orthogonal" => Ok(SamplerKind::Orthogonal),
            other => Err(Error::invalid(format!(
                "unknown sampler `{other}` (expected iid or orthogonal)"
            ))),
        }
    }
}

/// A `k x d` matrix of perturbation directions `g_i` (one per row).
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationEnsemble {
    pub rows: DMatrix<f64>,
    pub kind: SamplerKind,
    pub seed: u64,
}

impl PerturbationEnsemble {
    pub fn len(&self) -> usize {
        self.rows.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.rows.ncols()
    }

    pub fn direction(&self, i: usize) -> DVector<f64> {
        self.rows.row(i).transpose()
    }

    /// Wraps externally supplied directions, e.g. for hand-built fixtures.
    pub fn from_rows(rows: DMatrix<f64>) -> Self {
        PerturbationEnsemble {
            rows,
            kind: SamplerKind::IidGaussian,
            seed: 0,
        }
    }
}

fn gaussian_row(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    DVector::from_fn(dim, |_, _| rng.sample(StandardNormal))
}

/// Draws `count` directions. For the orthogonal kind with `count > dim` the
/// rows are stacked from independent orthogonal blocks of at most `dim` rows.
pub fn sample(kind: SamplerKind, count: usize, dim: usize, seed: u64, stream: u64) -> Result<PerturbationEnsemble> {
    match kind {
        SamplerKind::IidGaussian => sample_gaussian_stream(count, dim, seed, stream),
        SamplerKind::Orthogonal if count <= dim => sample_orthogonal_stream(count, dim, seed, stream),
        SamplerKind::Orthogonal => {
            let mut rng = stream_rng(seed, StreamTag::Sampling, stream);
            let mut rows = DMatrix::zeros(count, dim);
            let mut start = 0;
            while start < count {
                let block = (count - start).min(dim);
                let raw: Vec<DVector<f64>> = (0..block).map(|_| gaussian_row(&mut rng, dim)).collect();
                let q = orthogonalize(raw, || gaussian_row(&mut rng, dim))?;
                rows.rows_mut(start, block).copy_from(&q);
                start += block;
            }
            Ok(PerturbationEnsemble {
                rows,
                kind,
                seed,
            })
        }
    }
}

pub fn sample_gaussian(count: usize, dim: usize, seed: u64) -> Result<PerturbationEnsemble> {
    sample_gaussian_stream(count, dim, seed, 0)
}

pub fn sample_gaussian_stream(count: usize, dim: usize, seed: u64, stream: u64) -> Result<PerturbationEnsemble> {
    if count == 0 || dim == 0 {
        return Err(Error::invalid("ensemble needs k >= 1 and d >= 1"));
    }
    let mut rng = stream_rng(seed, StreamTag::Sampling, stream);
    // Row-major fill so row i only depends on the draws before it.
    let mut rows = DMatrix::zeros(count, dim);
    for i in 0..count {
        for j in 0..dim {
            rows[(i, j)] = rng.sample(StandardNormal);
        }
    }
    Ok(PerturbationEnsemble {
        rows,
        kind: SamplerKind::IidGaussian,
        seed,
    })
}

pub fn sample_orthogonal(count: usize, dim: usize, seed: u64) -> Result<PerturbationEnsemble> {
    sample_orthogonal_stream(count, dim, seed, 0)
}

pub fn sample_orthogonal_stream(count: usize, dim: usize, seed: u64, stream: u64) -> Result<PerturbationEnsemble> {
    if count == 0 || dim == 0 {
        return Err(Error::invalid("ensemble needs k >= 1 and d >= 1"));
    }
    if count > dim {
        return Err(Error::invalid(format!(
            "orthogonal ensemble needs k <= d (got k={count}, d={dim})"
        )));
    }
    let mut rng = stream_rng(seed, StreamTag::Sampling, stream);
    let raw: Vec<DVector<f64>> = (0..count).map(|_| gaussian_row(&mut rng, dim)).collect();
    let rows = orthogonalize(raw, || gaussian_row(&mut rng, dim))?;
    Ok(PerturbationEnsemble {
        rows,
        kind: SamplerKind::Orthogonal,
        seed,
    })
}

/// Modified Gram-Schmidt over `raw`, rescaling every output row to length √d.
///
/// A raw vector whose residual norm falls below the rank tolerance is replaced
/// by a fresh draw from `redraw` and orthogonalized again.
pub fn orthogonalize(
    raw: Vec<DVector<f64>>,
    mut redraw: impl FnMut() -> DVector<f64>,
) -> Result<DMatrix<f64>> {
    let count = raw.len();
    let dim = raw.first().map_or(0, |r| r.len());
    if count > dim {
        return Err(Error::invalid("cannot orthogonalize more rows than dimensions"));
    }
    let target = (dim as f64).sqrt();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(count);
    for candidate in raw {
        let mut v = candidate;
        let mut attempts = 0;
        loop {
            // Scale-relative test so tiny raw vectors are not flagged spuriously.
            let scale = v.norm();
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
            let n = v.norm();
            if scale > 0.0 && n > RANK_TOL * scale.max(1.0) {
                basis.push(v / n);
                break;
            }
            attempts += 1;
            if attempts > MAX_REDRAWS {
                return Err(Error::Singular("orthogonal sampler kept drawing dependent rows".into()));
            }
            v = redraw();
        }
    }
    let mut rows = DMatrix::zeros(count, dim);
    for (i, q) in basis.iter().enumerate() {
        rows.row_mut(i).copy_from(&(q * target).transpose());
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gaussian_is_reproducible() {
        let a = sample_gaussian(5, 3, 42).unwrap();
        let b = sample_gaussian(5, 3, 42).unwrap();
        assert_eq!(a, b);
        let c = sample_gaussian(5, 3, 43).unwrap();
        assert_ne!(a.rows, c.rows);
    }

    #[test]
    fn gaussian_moments() {
        let k = 100_000;
        let d = 4;
        let e = sample_gaussian(k, d, 9).unwrap();
        for j in 0..d {
            let mean = e.rows.column(j).sum() / k as f64;
            assert!(mean.abs() <= 4.0 / (k as f64).sqrt(), "column {j} mean {mean}");
        }
        let mean_sq = e.rows.row_iter().map(|r| r.norm_squared()).sum::<f64>() / k as f64;
        assert!((mean_sq - d as f64).abs() <= 0.05 * d as f64);
    }

    #[test]
    fn orthogonal_square_case() {
        let e = sample_orthogonal(2, 2, 5).unwrap();
        let gram = &e.rows * e.rows.transpose();
        assert_relative_eq!(gram, DMatrix::identity(2, 2) * 2.0, epsilon = 1e-10);
    }

    #[test]
    fn orthogonal_tall_case() {
        let e = sample_orthogonal(3, 8, 6).unwrap();
        for i in 0..3 {
            assert_relative_eq!(e.rows.row(i).norm(), 8f64.sqrt(), epsilon = 1e-12);
            for j in 0..i {
                assert!(e.rows.row(i).dot(&e.rows.row(j)).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn orthogonal_rejects_k_above_d() {
        assert!(matches!(sample_orthogonal(4, 3, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn duplicate_raw_rows_are_redrawn() {
        let first = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let raw = vec![first.clone(), first.clone(), first * 1e3];
        let mut rng = stream_rng(3, StreamTag::Fixture, 0);
        let mut redraws = 0;
        let rows = orthogonalize(raw, || {
            redraws += 1;
            gaussian_row(&mut rng, 3)
        })
        .unwrap();
        assert_eq!(redraws, 2);
        let gram = &rows * rows.transpose();
        assert_relative_eq!(gram, DMatrix::identity(3, 3) * 3.0, epsilon = 1e-10);
    }

    #[test]
    fn blocked_orthogonal() {
        let e = sample(SamplerKind::Orthogonal, 7, 3, 5, 2).unwrap();
        assert_eq!(e.len(), 7);
        for block in [0usize, 3] {
            let b = e.rows.rows(block, 3);
            assert_relative_eq!(&b * b.transpose(), DMatrix::identity(3, 3) * 3.0, epsilon = 1e-10);
        }
        assert_relative_eq!(e.rows.row(6).norm(), 3f64.sqrt(), epsilon = 1e-12);
        assert_eq!(e, sample(SamplerKind::Orthogonal, 7, 3, 5, 2).unwrap());
    }

    #[test]
    fn sampler_kind_parses() {
        assert_eq!("iid".parse::<SamplerKind>().unwrap(), SamplerKind::IidGaussian);
        assert_eq!("orthogonal".parse::<SamplerKind>().unwrap(), SamplerKind::Orthogonal);
        assert!("hadamard".parse::<SamplerKind>().is_err());
    }
}
