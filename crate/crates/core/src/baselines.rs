//! Comparison pipelines: no adaptation, target-PCA shared basis, and
//! subspace alignment. All three share the hinge classifier from
//! [`crate::svm`], so accuracy differences are attributable to the
//! representation alone. Inputs are expected to be normalized upstream.

use crate::error::{Error, Result};
use crate::linalg::{align_subspaces, center_rows, pca_basis, project, FeatureMatrix};
use crate::svm::{predict, train_linear_svm, LabeledDataset};

/// Source classifier applied to the target in the original feature space.
pub fn na_pipeline(
    source: &LabeledDataset,
    target: &FeatureMatrix,
    c: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    if source.features().ncols() != target.ncols() {
        return Err(Error::DimensionMismatch {
            context: "source vs target ambient dimension",
            left: source.features().ncols(),
            right: target.ncols(),
        });
    }
    let model = train_linear_svm(source, c, seed)?;
    predict(&model, target)
}

/// Both domains represented in the target PCA basis.
pub fn pca_t_pipeline(
    source: &LabeledDataset,
    target: &FeatureMatrix,
    d: usize,
    c: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    let t = pca_basis(target, d)?;
    let source_proj = project(source.features(), &t)?;
    let model = train_linear_svm(&source.with_features(source_proj)?, c, seed)?;
    predict(&model, &project(target, &t)?)
}

/// Subspace alignment: the source is represented through U = S S^T T
/// (centered by the source mean), the target through T (centered by the
/// target mean).
pub fn sa_pipeline(
    source: &LabeledDataset,
    target: &FeatureMatrix,
    d: usize,
    c: f64,
    seed: u64,
) -> Result<Vec<usize>> {
    let s = pca_basis(source.features(), d)?;
    let t = pca_basis(target, d)?;
    let alignment = align_subspaces(&s, &t)?;
    let centered = center_rows(source.features().matrix(), &s.mean);
    let source_repr = FeatureMatrix::new(centered * &alignment.u)?;
    let model = train_linear_svm(&source.with_features(source_repr)?, c, seed)?;
    predict(&model, &project(target, &t)?)
}

/// The aligned source representation and the target basis used by
/// [`sa_pipeline`], exposed for divergence diagnostics.
pub fn sa_representations(
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    d: usize,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let s = pca_basis(source, d)?;
    let t = pca_basis(target, d)?;
    let alignment = align_subspaces(&s, &t)?;
    let centered = center_rows(source.matrix(), &s.mean);
    let source_repr = FeatureMatrix::new(centered * &alignment.u)?;
    let target_repr = project(target, &t)?;
    Ok((source_repr, target_repr))
}
