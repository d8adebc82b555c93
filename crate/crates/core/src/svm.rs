//! L2-regularized linear hinge-loss classification (binary and
//! one-vs-all), trained from scratch by stochastic subgradient descent.
//!
//! Models are homogeneous (no intercept): the per-class score of a sample
//! is a plain dot product, so datasets are expected to be centered or
//! normalized upstream. Per class y the trainer minimizes
//! ||w||^2 + c * sum_i max{0, 1 - y_i <w, x_i>}.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;
use crate::rng::SplitMix64;

/// Fixed optimizer settings: step size, mini-batch size, epoch cap, and
/// relative-change stopping threshold shared by all hinge trainers here.
pub const SVM_STEP: f64 = 0.1;
pub const SVM_BATCH: usize = 10;
pub const SVM_MAX_EPOCHS: usize = 200;
pub const SVM_TOL: f64 = 1e-4;

/// Feature matrix with integer class labels in 1..=K.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    labels: Vec<usize>,
    num_classes: usize,
}

impl LabeledDataset {
    /// `labels` must be contiguous class ids 1..=K, each class non-empty.
    pub fn new(features: FeatureMatrix, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != features.nrows() {
            return Err(Error::DimensionMismatch {
                context: "label count vs feature rows",
                left: labels.len(),
                right: features.nrows(),
            });
        }
        let k = *labels.iter().max().expect("non-empty by FeatureMatrix invariant");
        let mut seen = vec![false; k + 1];
        for &l in &labels {
            if l == 0 {
                return Err(Error::NonIntegerLabel {
                    line: 0,
                    value: "0 (class ids start at 1)".into(),
                });
            }
            seen[l] = true;
        }
        if let Some(missing) = (1..=k).find(|&c| !seen[c]) {
            return Err(Error::ClassTooSmall {
                class: missing,
                count: 0,
            });
        }
        Ok(LabeledDataset {
            features,
            labels,
            num_classes: k,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Subset by row indices. The class count is preserved even if a class
    /// is absent from the subset, so one-vs-all shapes stay comparable
    /// across folds.
    pub fn select(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            features: self.features.select_rows(indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            num_classes: self.num_classes,
        }
    }

    /// +1 for `class`, -1 for the rest.
    pub fn binary_labels(&self, class: usize) -> Vec<f64> {
        self.labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect()
    }

    /// Replaces the feature matrix, keeping labels (e.g. after projection).
    pub fn with_features(&self, features: FeatureMatrix) -> Result<LabeledDataset> {
        if features.nrows() != self.labels.len() {
            return Err(Error::DimensionMismatch {
                context: "replacement feature rows vs labels",
                left: features.nrows(),
                right: self.labels.len(),
            });
        }
        Ok(LabeledDataset {
            features,
            labels: self.labels.clone(),
            num_classes: self.num_classes,
        })
    }
}

/// One weight row per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// K x d.
    pub weights: DMatrix<f64>,
    pub c: f64,
}

/// One-vs-all hinge-loss training; deterministic for a fixed seed.
pub fn train_linear_svm(data: &LabeledDataset, c: f64, seed: u64) -> Result<LinearModel> {
    if data.num_classes() < 2 {
        return Err(Error::SingleClassData);
    }
    assert!(c > 0.0, "regularization weight must be positive");
    let d = data.features().ncols();
    let mut weights = DMatrix::zeros(data.num_classes(), d);
    for class in 1..=data.num_classes() {
        let labels = data.binary_labels(class);
        let w = sgd_hinge(
            data.features().matrix(),
            &labels,
            c,
            seed.wrapping_add(class as u64),
        );
        weights.row_mut(class - 1).copy_from(&w.transpose());
    }
    Ok(LinearModel { weights, c })
}

/// Per row: argmax over class scores, ties to the lowest class id.
pub fn predict(model: &LinearModel, x: &FeatureMatrix) -> Result<Vec<usize>> {
    if x.ncols() != model.weights.ncols() {
        return Err(Error::DimensionMismatch {
            context: "prediction feature dimension",
            left: x.ncols(),
            right: model.weights.ncols(),
        });
    }
    let scores = x.matrix() * model.weights.transpose();
    Ok(argmax_rows(&scores))
}

/// Row-wise argmax (strictly-greater replacement keeps the lowest index on
/// ties); returns 1-based class ids.
pub(crate) fn argmax_rows(scores: &DMatrix<f64>) -> Vec<usize> {
    scores
        .row_iter()
        .map(|row| {
            let mut best = 0usize;
            let mut best_score = row[0];
            for (j, &s) in row.iter().enumerate().skip(1) {
                if s > best_score {
                    best_score = s;
                    best = j;
                }
            }
            best + 1
        })
        .collect()
}

pub fn accuracy(predicted: &[usize], actual: &[usize]) -> f64 {
    assert_eq!(predicted.len(), actual.len());
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    hits as f64 / predicted.len() as f64
}

/// Binary hinge SGD core. Mini-batches sweep a fresh seeded permutation
/// each epoch; subgradients are summed over the batch and a margin of
/// exactly 1 contributes zero.
fn sgd_hinge(features: &DMatrix<f64>, labels: &[f64], c: f64, seed: u64) -> DVector<f64> {
    let n = features.nrows();
    let d = features.ncols();
    let mut w = DVector::zeros(d);
    let mut rng = SplitMix64::new(seed);
    for _epoch in 0..SVM_MAX_EPOCHS {
        let w_start = w.clone();
        let perm = rng.permutation(n);
        for chunk in perm.chunks(SVM_BATCH) {
            let mut g = &w * 2.0;
            for &i in chunk {
                let mut margin = 0.0;
                for k in 0..d {
                    margin += features[(i, k)] * w[k];
                }
                if margin * labels[i] < 1.0 {
                    for k in 0..d {
                        g[k] -= c * labels[i] * features[(i, k)];
                    }
                }
            }
            w.axpy(-SVM_STEP, &g, 1.0);
        }
        let rel = (&w - &w_start).norm() / w_start.norm().max(1e-12);
        if rel < SVM_TOL {
            break;
        }
    }
    w
}
