//! Shared helpers for unit tests. Oracles here stay independent of the
//! implementation paths they are used to check.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{gram_schmidt, FeatureMatrix, SubspaceBasis};
use crate::rng::SplitMix64;

pub(crate) fn random_matrix(rng: &mut SplitMix64, n: usize, d: usize) -> FeatureMatrix {
    let data = DMatrix::from_fn(n, d, |_, _| rng.next_normal());
    FeatureMatrix::new(data).unwrap()
}

pub(crate) fn random_orthonormal(rng: &mut SplitMix64, dim: usize, d: usize) -> SubspaceBasis {
    let mut cols: Vec<DVector<f64>> = (0..d)
        .map(|_| DVector::from_fn(dim, |_, _| rng.next_normal()))
        .collect();
    gram_schmidt(&mut cols, d).unwrap();
    SubspaceBasis {
        basis: DMatrix::from_columns(&cols),
        mean: DVector::zeros(dim),
    }
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix, written
/// independently of the nalgebra solver the implementation uses.
/// Returns eigenvalues in descending order.
pub(crate) fn jacobi_eigenvalues(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += m[(p, q)] * m[(p, q)];
            }
        }
        if off < 1e-24 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if m[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * m[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut vals: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    vals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vals
}

/// Population covariance built with explicit loops.
pub(crate) fn explicit_covariance(x: &FeatureMatrix) -> DMatrix<f64> {
    let n = x.nrows();
    let d = x.ncols();
    let mean = x.column_means();
    let mut cov = DMatrix::zeros(d, d);
    for i in 0..d {
        for j in 0..d {
            let mut acc = 0.0;
            for r in 0..n {
                acc += (x.matrix()[(r, i)] - mean[i]) * (x.matrix()[(r, j)] - mean[j]);
            }
            cov[(i, j)] = acc / n as f64;
        }
    }
    cov
}
