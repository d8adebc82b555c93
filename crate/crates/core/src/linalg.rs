//! Dense subspace primitives: PCA basis extraction, projection onto a
//! basis, Frobenius distances, and closed-form subspace alignment.
//!
//! Conventions fixed here and relied on everywhere else:
//! - covariance is population-normalized (1/n);
//! - eigenvectors are ordered by descending eigenvalue, ties broken by the
//!   first differing eigenvector entry;
//! - each basis column is sign-fixed so its largest-magnitude entry is
//!   positive, making every basis deterministic;
//! - projection always centers with the mean of the domain the basis was
//!   fit on, never the mean of the data being projected.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Row-per-sample matrix of finite feature values.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub(crate) data: DMatrix<f64>,
}

impl FeatureMatrix {
    /// Validates shape (n >= 1, D >= 1) and finiteness.
    pub fn new(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::EmptyMatrix);
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(FeatureMatrix { data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::EmptyMatrix);
        }
        let cols = rows[0].len();
        if let Some(bad) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch {
                context: "row length",
                left: bad.len(),
                right: cols,
            });
        }
        let data = DMatrix::from_row_iterator(rows.len(), cols, rows.iter().flatten().copied());
        FeatureMatrix::new(data)
    }

    pub fn nrows(&self) -> usize {
        self.data.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.data
    }

    /// New matrix holding the given rows, in the given order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let data = self.data.select_rows(indices.iter());
        FeatureMatrix { data }
    }

    /// Stack two matrices with equal column counts.
    pub fn vstack(&self, other: &FeatureMatrix) -> Result<FeatureMatrix> {
        if self.ncols() != other.ncols() {
            return Err(Error::DimensionMismatch {
                context: "vstack column counts",
                left: self.ncols(),
                right: other.ncols(),
            });
        }
        let mut data = DMatrix::zeros(self.nrows() + other.nrows(), self.ncols());
        data.view_mut((0, 0), (self.nrows(), self.ncols()))
            .copy_from(&self.data);
        data.view_mut((self.nrows(), 0), (other.nrows(), other.ncols()))
            .copy_from(&other.data);
        Ok(FeatureMatrix { data })
    }

    pub fn column_means(&self) -> DVector<f64> {
        let n = self.nrows() as f64;
        DVector::from_iterator(self.ncols(), self.data.column_iter().map(|c| c.sum() / n))
    }
}

/// Column-orthonormal basis plus the centering mean of the domain it was
/// fit on.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceBasis {
    /// D x d, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Length-D column means of the fitting data.
    pub mean: DVector<f64>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.basis.nrows()
    }

    /// max |B^T B - I| — should be < 1e-10 for any constructed basis.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.basis.transpose() * &self.basis;
        let d = self.dim();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }
}

/// Optimal transform of one basis toward another.
#[derive(Debug, Clone)]
pub struct AlignmentResult {
    /// d x d transformation.
    pub m: DMatrix<f64>,
    /// D x d aligned source representation S*M.
    pub u: DMatrix<f64>,
    /// ||S*M - T||_F^2 at the optimum.
    pub residual: f64,
}

/// Top-d principal directions of the sample covariance of `x`.
///
/// Uses the D x D covariance when D <= n, otherwise the n x n Gram matrix.
/// Fails with `DegenerateData` when the covariance rank cannot support the
/// requested dimension.
pub fn pca_basis(x: &FeatureMatrix, d: usize) -> Result<SubspaceBasis> {
    let n = x.nrows();
    let dim = x.ncols();
    let max_d = dim.min(n.saturating_sub(1));
    if d == 0 || d > max_d {
        return Err(Error::DimensionTooLarge {
            requested: d,
            max: max_d,
        });
    }

    let mean = x.column_means();
    let centered = center_rows(&x.data, &mean);

    let mut pairs: Vec<(f64, DVector<f64>)> = if dim <= n {
        let cov = centered.transpose() * &centered / n as f64;
        let eig = cov.symmetric_eigen();
        (0..dim)
            .map(|k| (eig.eigenvalues[k], eig.eigenvectors.column(k).into_owned()))
            .collect()
    } else {
        // Gram trick: eigenvectors of (1/n) X X^T lifted back to R^D.
        let gram = &centered * centered.transpose() / n as f64;
        let eig = gram.symmetric_eigen();
        let mut out = Vec::with_capacity(n);
        for k in 0..n {
            let lifted = centered.transpose() * eig.eigenvectors.column(k);
            let norm = lifted.norm();
            if norm > 0.0 {
                out.push((eig.eigenvalues[k], lifted / norm));
            }
        }
        out
    };

    for (_, v) in pairs.iter_mut() {
        sign_fix(v);
    }

    let lambda_max = pairs.iter().map(|(l, _)| *l).fold(0.0f64, f64::max);
    let tie_tol = lambda_max.max(f64::MIN_POSITIVE) * 1e-12;
    pairs.sort_by(|(la, va), (lb, vb)| {
        if (la - lb).abs() <= tie_tol {
            lex_cmp(vb, va) // within a tie, larger first-differing entry first
        } else {
            lb.partial_cmp(la).unwrap()
        }
    });

    let rank_tol = lambda_max * 1e-10;
    let rank = pairs.iter().filter(|(l, _)| *l > rank_tol).count();
    if d > rank {
        return Err(Error::DegenerateData { requested: d, rank });
    }

    let mut cols: Vec<DVector<f64>> = pairs.into_iter().take(d).map(|(_, v)| v).collect();
    gram_schmidt(&mut cols, d)?;
    for v in cols.iter_mut() {
        sign_fix(v);
    }

    let basis = DMatrix::from_columns(&cols);
    Ok(SubspaceBasis { basis, mean })
}

/// Projects each row of `x` onto `b`: (x - b.mean) * b.basis.
pub fn project(x: &FeatureMatrix, b: &SubspaceBasis) -> Result<FeatureMatrix> {
    if x.ncols() != b.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "projection ambient dimension",
            left: x.ncols(),
            right: b.ambient_dim(),
        });
    }
    let centered = center_rows(&x.data, &b.mean);
    Ok(FeatureMatrix {
        data: centered * &b.basis,
    })
}

/// Closed-form alignment of basis `s` toward basis `t`: M = S^T T,
/// U = S M, residual = ||S M - T||_F^2.
pub fn align_subspaces(s: &SubspaceBasis, t: &SubspaceBasis) -> Result<AlignmentResult> {
    if s.dim() != t.dim() {
        return Err(Error::DimensionMismatch {
            context: "subspace dimensions",
            left: s.dim(),
            right: t.dim(),
        });
    }
    if s.ambient_dim() != t.ambient_dim() {
        return Err(Error::DimensionMismatch {
            context: "ambient dimensions",
            left: s.ambient_dim(),
            right: t.ambient_dim(),
        });
    }
    let m = s.basis.transpose() * &t.basis;
    let u = &s.basis * &m;
    let residual = frobenius_distance_sq(&u, &t.basis)?;
    Ok(AlignmentResult { m, u, residual })
}

/// Sum of squared entrywise differences.
pub fn frobenius_distance_sq(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            context: "frobenius distance shapes",
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum())
}

/// Subtracts `mean` from each row.
pub(crate) fn center_rows(m: &DMatrix<f64>, mean: &DVector<f64>) -> DMatrix<f64> {
    let mut out = m.clone();
    for mut row in out.row_iter_mut() {
        for (v, mu) in row.iter_mut().zip(mean.iter()) {
            *v -= mu;
        }
    }
    out
}

/// Flips the vector so its largest-magnitude entry (first such entry on
/// ties) is positive.
fn sign_fix(v: &mut DVector<f64>) {
    let mut best = 0usize;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best_abs {
            best_abs = x.abs();
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.neg_mut();
    }
}

fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.partial_cmp(y).unwrap() {
            std::cmp::Ordering::Equal => continue,
            other => return other,
        }
    }
    std::cmp::Ordering::Equal
}

/// Modified Gram-Schmidt; cleans up residual non-orthogonality from the
/// Gram-trick lift.
pub(crate) fn gram_schmidt(cols: &mut [DVector<f64>], requested: usize) -> Result<()> {
    for j in 0..cols.len() {
        for i in 0..j {
            let proj = cols[i].dot(&cols[j]);
            let prior = cols[i].clone();
            cols[j].axpy(-proj, &prior, 1.0);
        }
        let norm = cols[j].norm();
        if norm < 1e-14 {
            return Err(Error::DegenerateData {
                requested,
                rank: j,
            });
        }
        cols[j] /= norm;
    }
    Ok(())
}
