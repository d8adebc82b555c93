//! Source-only hyperparameter selection by stratified two-fold
//! cross-validation. Target data enter only as an unlabeled feature
//! matrix (the type makes target-label leakage impossible), and the
//! target basis is computed once per candidate dimension from the full
//! unlabeled target.

use crate::error::{Error, Result};
use crate::jcsl::{predict_jcsl, train_jcsl_with_bases, JcslHyperParams};
use crate::linalg::{pca_basis, FeatureMatrix};
use crate::rng::SplitMix64;
use crate::svm::{accuracy, predict, train_linear_svm, LabeledDataset};

/// Candidate values; the defaults are {0.001, 0.01, 0.1, 1, 10} for the
/// scalar weights and {10, 20, ..., 100} for the dimension (clipped to
/// the feasible range at search time).
#[derive(Debug, Clone, PartialEq)]
pub struct HyperGrid {
    pub alphas: Vec<f64>,
    pub betas: Vec<f64>,
    pub cs: Vec<f64>,
    pub ds: Vec<usize>,
}

impl Default for HyperGrid {
    fn default() -> Self {
        HyperGrid {
            alphas: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            betas: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            cs: vec![0.001, 0.01, 0.1, 1.0, 10.0],
            ds: (1..=10).map(|k| 10 * k).collect(),
        }
    }
}

impl HyperGrid {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if self.alphas.is_empty() || self.betas.is_empty() || self.cs.is_empty() || self.ds.is_empty()
        {
            return bad("grid lists must be non-empty");
        }
        if self.alphas.iter().chain(&self.betas).any(|v| !(*v >= 0.0) || !v.is_finite()) {
            return bad("alphas and betas must be finite and >= 0");
        }
        if self.cs.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return bad("cs must be finite and > 0");
        }
        if self.ds.iter().any(|&d| d == 0) {
            return bad("ds must be >= 1");
        }
        Ok(())
    }
}

/// Fixed (non-searched) optimizer settings for grid cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JcslFixedParams {
    pub eta: f64,
    pub batch: usize,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for JcslFixedParams {
    fn default() -> Self {
        JcslFixedParams {
            eta: crate::jcsl::JCSL_ETA,
            batch: crate::jcsl::JCSL_BATCH,
            max_iters: crate::jcsl::JCSL_MAX_ITERS,
            tol: crate::jcsl::JCSL_TOL,
        }
    }
}

/// One evaluated grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub d: usize,
    pub fold_a_acc: f64,
    pub fold_b_acc: f64,
    pub mean_acc: f64,
}

/// Every evaluated cell in deterministic grid order (alpha-major, then
/// beta, then d), the index of the selected cell, and the dimensions that
/// were clipped out as infeasible.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchReport {
    pub cells: Vec<GridCell>,
    pub selected: usize,
    pub seed: u64,
    pub clipped_ds: Vec<usize>,
}

impl GridSearchReport {
    pub fn selected_cell(&self) -> &GridCell {
        &self.cells[self.selected]
    }

    /// CSV rows: alpha,beta,d,fold_a_acc,fold_b_acc,mean_acc,selected_flag.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("alpha,beta,d,fold_a_acc,fold_b_acc,mean_acc,selected_flag\n");
        for (i, cell) in self.cells.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                cell.alpha,
                cell.beta,
                cell.d,
                cell.fold_a_acc,
                cell.fold_b_acc,
                cell.mean_acc,
                usize::from(i == self.selected)
            ));
        }
        out
    }
}

/// Splits each class as evenly as possible across two folds (the extra
/// sample of an odd class goes to fold A), with a seeded permutation
/// inside every class. Folds are disjoint, exhaustive, and sorted.
pub fn stratified_two_fold(data: &LabeledDataset, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let k = data.num_classes();
    let mut per_class: Vec<Vec<usize>> = vec![Vec::new(); k + 1];
    for (i, &label) in data.labels().iter().enumerate() {
        per_class[label].push(i);
    }
    for class in 1..=k {
        if per_class[class].len() < 2 {
            return Err(Error::ClassTooSmall {
                class,
                count: per_class[class].len(),
            });
        }
    }
    let mut rng = SplitMix64::new(seed);
    let mut fold_a = Vec::new();
    let mut fold_b = Vec::new();
    for class in 1..=k {
        let mut idx = per_class[class].clone();
        rng.shuffle(&mut idx);
        let cut = idx.len().div_ceil(2);
        fold_a.extend_from_slice(&idx[..cut]);
        fold_b.extend_from_slice(&idx[cut..]);
    }
    fold_a.sort_unstable();
    fold_b.sort_unstable();
    Ok((fold_a, fold_b))
}

fn feasible_dimensions(
    ds: &[usize],
    fold_sizes: &[usize],
    n_target: usize,
    ambient: usize,
) -> (Vec<usize>, Vec<usize>) {
    let fold_cap = fold_sizes.iter().map(|&n| n.saturating_sub(1)).min().unwrap_or(0);
    let cap = fold_cap.min(n_target.saturating_sub(1)).min(ambient);
    let (feasible, clipped): (Vec<usize>, Vec<usize>) =
        ds.iter().partition(|&&d| d >= 1 && d <= cap);
    (feasible, clipped)
}

/// Grid search for (alpha, beta, d): every cell is scored by two-fold CV
/// accuracy on the source, with the unlabeled target defining T for both
/// folds. Ties select the earliest cell in grid order. The caller
/// retrains on the full source with the selected cell.
pub fn grid_search_jcsl(
    source: &LabeledDataset,
    target: &FeatureMatrix,
    grid: &HyperGrid,
    fixed: &JcslFixedParams,
    seed: u64,
) -> Result<GridSearchReport> {
    grid.validate()?;
    let (fold_a, fold_b) = stratified_two_fold(source, seed)?;
    let (feasible_ds, clipped_ds) = feasible_dimensions(
        &grid.ds,
        &[fold_a.len(), fold_b.len()],
        target.nrows(),
        source.features().ncols(),
    );
    if feasible_ds.is_empty() {
        return Err(Error::EmptyFeasibleGrid);
    }

    let data_a = source.select(&fold_a);
    let data_b = source.select(&fold_b);

    // shared bases per feasible dimension
    let mut bases = Vec::with_capacity(feasible_ds.len());
    for &d in &feasible_ds {
        let t = pca_basis(target, d)?;
        let s_a = pca_basis(data_a.features(), d)?;
        let s_b = pca_basis(data_b.features(), d)?;
        bases.push((d, t, s_a, s_b));
    }

    let mut cells = Vec::new();
    for &alpha in &grid.alphas {
        for &beta in &grid.betas {
            for (d, t, s_a, s_b) in &bases {
                let params = JcslHyperParams {
                    alpha,
                    beta,
                    d: *d,
                    eta: fixed.eta,
                    batch: fixed.batch,
                    max_iters: fixed.max_iters,
                    tol: fixed.tol,
                    seed,
                };
                let model_a = train_jcsl_with_bases(&data_a, t, Some(&s_a.basis), &params)?;
                let fold_a_acc = accuracy(
                    &predict_jcsl(&model_a, data_b.features())?,
                    data_b.labels(),
                );
                let model_b = train_jcsl_with_bases(&data_b, t, Some(&s_b.basis), &params)?;
                let fold_b_acc = accuracy(
                    &predict_jcsl(&model_b, data_a.features())?,
                    data_a.labels(),
                );
                cells.push(GridCell {
                    alpha,
                    beta,
                    d: *d,
                    fold_a_acc,
                    fold_b_acc,
                    mean_acc: 0.5 * (fold_a_acc + fold_b_acc),
                });
            }
        }
    }

    let selected = argmax_cell(&cells);
    Ok(GridSearchReport {
        cells,
        selected,
        seed,
        clipped_ds,
    })
}

fn argmax_cell(cells: &[GridCell]) -> usize {
    let mut best = 0;
    for (i, cell) in cells.iter().enumerate().skip(1) {
        if cell.mean_acc > cells[best].mean_acc {
            best = i;
        }
    }
    best
}

/// Two-fold CV selection of the hinge regularization weight; ties pick
/// the earliest value in `cs`.
pub fn grid_search_svm_c(data: &LabeledDataset, cs: &[f64], seed: u64) -> Result<f64> {
    if cs.is_empty() {
        return Err(Error::InvalidParams("empty C grid".into()));
    }
    if cs.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParams("cs must be finite and > 0".into()));
    }
    let (fold_a, fold_b) = stratified_two_fold(data, seed)?;
    let data_a = data.select(&fold_a);
    let data_b = data.select(&fold_b);
    let mut best_c = cs[0];
    let mut best_acc = f64::NEG_INFINITY;
    for &c in cs {
        let acc = cv_accuracy_svm(&data_a, &data_b, c, seed)?;
        if acc > best_acc {
            best_acc = acc;
            best_c = c;
        }
    }
    Ok(best_c)
}

pub(crate) fn cv_accuracy_svm(
    data_a: &LabeledDataset,
    data_b: &LabeledDataset,
    c: f64,
    seed: u64,
) -> Result<f64> {
    let model_a = train_linear_svm(data_a, c, seed)?;
    let acc_a = accuracy(&predict(&model_a, data_b.features())?, data_b.labels());
    let model_b = train_linear_svm(data_b, c, seed)?;
    let acc_b = accuracy(&predict(&model_b, data_a.features())?, data_a.labels());
    Ok(0.5 * (acc_a + acc_b))
}
