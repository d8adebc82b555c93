//! Joint learning of a source representation and a max-margin classifier.
//!
//! For a fixed target basis T, the binary trainer minimizes
//!
//! ```text
//! G(V, w) = ||w||^2 + alpha ||V - T||_F^2
//!         + beta * sum_i max{0, 1 - x_i^T V w y_i}
//! ```
//!
//! over the source representation V (D x d) and weight vector w (d), by
//! alternating stochastic subgradient steps: per mini-batch both partial
//! subgradients are evaluated at the current point, then w and V take one
//! step each. Source samples are centered by the target mean before
//! entering the margin, and prediction uses only T — V never appears at
//! test time.
//!
//! Multiclass problems train one binary model per class (one-vs-all) and
//! predict by the maximum of the per-class scores (x - mean_T)^T T w_y.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{center_rows, frobenius_distance_sq, pca_basis, project, FeatureMatrix, SubspaceBasis};
use crate::rng::SplitMix64;
use crate::svm::{argmax_rows, LabeledDataset};

/// Optimizer and objective settings for one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct JcslHyperParams {
    /// Weight of the subspace-divergence term ||V - T||_F^2.
    pub alpha: f64,
    /// Weight of the summed hinge loss.
    pub beta: f64,
    /// Subspace dimensionality.
    pub d: usize,
    /// Subgradient step size.
    pub eta: f64,
    /// Mini-batch size; set to the sample count for full-batch descent.
    pub batch: usize,
    /// Cap on full passes over the source.
    pub max_iters: usize,
    /// Relative-change convergence threshold.
    pub tol: f64,
    pub seed: u64,
}

pub const JCSL_ETA: f64 = 0.1;
pub const JCSL_BATCH: usize = 10;
pub const JCSL_MAX_ITERS: usize = 100;
pub const JCSL_TOL: f64 = 1e-4;

impl JcslHyperParams {
    /// Defaults for everything but (alpha, beta, d).
    pub fn new(alpha: f64, beta: f64, d: usize) -> Self {
        JcslHyperParams {
            alpha,
            beta,
            d,
            eta: JCSL_ETA,
            batch: JCSL_BATCH,
            max_iters: JCSL_MAX_ITERS,
            tol: JCSL_TOL,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and >= 0");
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return bad("beta must be finite and >= 0");
        }
        if self.d == 0 {
            return bad("d must be >= 1");
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return bad("eta must be finite and > 0");
        }
        if self.batch == 0 {
            return bad("batch must be >= 1");
        }
        if self.max_iters == 0 {
            return bad("max_iters must be >= 1");
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return bad("tol must be finite and > 0");
        }
        Ok(())
    }
}

/// One (V, w) pair for a single one-vs-all problem.
#[derive(Debug, Clone, PartialEq)]
pub struct JcslBinaryModel {
    /// Source representation, D x d.
    pub v: DMatrix<f64>,
    /// Classifier weights, length d.
    pub w: DVector<f64>,
    /// Full-data objective at the returned parameters.
    pub final_objective: f64,
    /// Full passes actually performed.
    pub iterations: usize,
}

/// Shared target basis plus per-class binary models, indexed by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct JcslMulticlassModel {
    pub t: SubspaceBasis,
    pub per_class: Vec<JcslBinaryModel>,
    pub alpha: f64,
    pub beta: f64,
}

impl JcslMulticlassModel {
    pub fn num_classes(&self) -> usize {
        self.per_class.len()
    }
}

fn check_binary_labels(labels: &[f64], n_rows: usize) -> Result<()> {
    if labels.len() != n_rows {
        return Err(Error::DimensionMismatch {
            context: "label count vs feature rows",
            left: labels.len(),
            right: n_rows,
        });
    }
    for &y in labels {
        if y != 1.0 && y != -1.0 {
            return Err(Error::NonBinaryLabels { found: y });
        }
    }
    Ok(())
}

fn check_shapes(v: &DMatrix<f64>, w: &DVector<f64>, t: &SubspaceBasis, cols: usize) -> Result<()> {
    if v.nrows() != t.ambient_dim() || v.ncols() != t.dim() {
        return Err(Error::DimensionMismatch {
            context: "V shape vs T shape",
            left: v.nrows() * v.ncols(),
            right: t.ambient_dim() * t.dim(),
        });
    }
    if w.len() != v.ncols() {
        return Err(Error::DimensionMismatch {
            context: "w length vs subspace dimension",
            left: w.len(),
            right: v.ncols(),
        });
    }
    if cols != v.nrows() {
        return Err(Error::DimensionMismatch {
            context: "feature dimension vs V rows",
            left: cols,
            right: v.nrows(),
        });
    }
    Ok(())
}

/// Regularized risk: ||w||^2 + alpha ||V-T||_F^2 + beta * sum of hinges,
/// with samples centered by the target mean.
pub fn jcsl_objective(
    v: &DMatrix<f64>,
    w: &DVector<f64>,
    t: &SubspaceBasis,
    features: &FeatureMatrix,
    labels: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    check_shapes(v, w, t, features.ncols())?;
    check_binary_labels(labels, features.nrows())?;
    let centered = center_rows(features.matrix(), &t.mean);
    Ok(objective_centered(v, w, t, &centered, labels, alpha, beta))
}

fn objective_centered(
    v: &DMatrix<f64>,
    w: &DVector<f64>,
    t: &SubspaceBasis,
    centered: &DMatrix<f64>,
    labels: &[f64],
    alpha: f64,
    beta: f64,
) -> f64 {
    let vw = v * w;
    let mut hinge_sum = 0.0;
    for (i, &y) in labels.iter().enumerate() {
        let mut score = 0.0;
        for k in 0..centered.ncols() {
            score += centered[(i, k)] * vw[k];
        }
        hinge_sum += (1.0 - score * y).max(0.0);
    }
    w.norm_squared()
        + alpha * frobenius_distance_sq(v, &t.basis).expect("shapes checked")
        + beta * hinge_sum
}

/// Partial subgradients of the risk at (V, w) over the given samples.
///
/// A sample is active iff its margin is strictly below 1; a margin of
/// exactly 1 contributes zero. The V-derivative of the margin is the
/// outer product y_i x_i w^T.
pub fn jcsl_subgradients(
    v: &DMatrix<f64>,
    w: &DVector<f64>,
    t: &SubspaceBasis,
    features: &FeatureMatrix,
    labels: &[f64],
    alpha: f64,
    beta: f64,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    check_shapes(v, w, t, features.ncols())?;
    check_binary_labels(labels, features.nrows())?;
    let centered = center_rows(features.matrix(), &t.mean);
    let all: Vec<usize> = (0..features.nrows()).collect();
    Ok(subgradients_centered(v, w, t, &centered, labels, alpha, beta, &all))
}

#[allow(clippy::too_many_arguments)]
fn subgradients_centered(
    v: &DMatrix<f64>,
    w: &DVector<f64>,
    t: &SubspaceBasis,
    centered: &DMatrix<f64>,
    labels: &[f64],
    alpha: f64,
    beta: f64,
    batch: &[usize],
) -> (DMatrix<f64>, DVector<f64>) {
    let dim = v.nrows();
    let d = v.ncols();
    let mut dv = (v - &t.basis) * (2.0 * alpha);
    let mut dw = w * 2.0;
    for &i in batch {
        let y = labels[i];
        // p = V^T x_i on the centered sample
        let mut p = DVector::zeros(d);
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += v[(k, j)] * centered[(i, k)];
            }
            p[j] = acc;
        }
        let margin = p.dot(w) * y;
        if margin < 1.0 {
            let scale = beta * y;
            for j in 0..d {
                dw[j] -= scale * p[j];
                let wj = scale * w[j];
                for k in 0..dim {
                    dv[(k, j)] -= wj * centered[(i, k)];
                }
            }
        }
    }
    (dv, dw)
}

/// Trains one binary model; V starts at the source PCA basis at the same
/// dimension and w at zero.
pub fn train_jcsl_binary(
    features: &FeatureMatrix,
    labels: &[f64],
    t: &SubspaceBasis,
    params: &JcslHyperParams,
) -> Result<JcslBinaryModel> {
    check_binary_labels(labels, features.nrows())?;
    if !labels.iter().any(|&y| y > 0.0) || !labels.iter().any(|&y| y < 0.0) {
        return Err(Error::SingleClassData);
    }
    let s = pca_basis(features, params.d)?;
    train_binary_with_init(features, labels, t, s.basis, params)
}

/// Core alternating loop, starting from an explicit V.
pub(crate) fn train_binary_with_init(
    features: &FeatureMatrix,
    labels: &[f64],
    t: &SubspaceBasis,
    v_init: DMatrix<f64>,
    params: &JcslHyperParams,
) -> Result<JcslBinaryModel> {
    params.validate()?;
    if t.dim() != params.d {
        return Err(Error::DimensionMismatch {
            context: "target basis dimension vs params.d",
            left: t.dim(),
            right: params.d,
        });
    }
    let mut w = DVector::zeros(params.d);
    check_shapes(&v_init, &w, t, features.ncols())?;
    check_binary_labels(labels, features.nrows())?;

    let n = features.nrows();
    let centered = center_rows(features.matrix(), &t.mean);
    let mut v = v_init;
    let mut rng = SplitMix64::new(params.seed);
    let mut iterations = 0;

    for iter in 1..=params.max_iters {
        iterations = iter;
        let v_start = v.clone();
        let w_start = w.clone();
        let perm = rng.permutation(n);
        // mini-batches may be single-class; that is fine
        for chunk in perm.chunks(params.batch) {
            let (dv, dw) = subgradients_centered(
                &v, &w, t, &centered, labels, params.alpha, params.beta, chunk,
            );
            // Both partials are taken at the pre-update point; w steps
            // first, then V.
            w.axpy(-params.eta, &dw, 1.0);
            v -= dv * params.eta;
        }
        let rel_v = (&v - &v_start).norm() / v_start.norm().max(1e-12);
        let rel_w = (&w - &w_start).norm() / w_start.norm().max(1e-12);
        if rel_v.max(rel_w) < params.tol {
            break;
        }
    }

    let final_objective =
        objective_centered(&v, &w, t, &centered, labels, params.alpha, params.beta);
    Ok(JcslBinaryModel {
        v,
        w,
        final_objective,
        iterations,
    })
}

/// One-vs-all training: T is computed once from the unlabeled target, and
/// class y's trainer is seeded with `params.seed + y`.
pub fn train_jcsl(
    source: &LabeledDataset,
    target: &FeatureMatrix,
    params: &JcslHyperParams,
) -> Result<JcslMulticlassModel> {
    params.validate()?;
    if source.features().ncols() != target.ncols() {
        return Err(Error::DimensionMismatch {
            context: "source vs target ambient dimension",
            left: source.features().ncols(),
            right: target.ncols(),
        });
    }
    let t = pca_basis(target, params.d)?;
    train_jcsl_with_bases(source, &t, None, params)
}

/// One-vs-all loop over precomputed bases; `s_basis` defaults to the
/// source PCA basis at the shared dimension.
pub(crate) fn train_jcsl_with_bases(
    source: &LabeledDataset,
    t: &SubspaceBasis,
    s_basis: Option<&DMatrix<f64>>,
    params: &JcslHyperParams,
) -> Result<JcslMulticlassModel> {
    params.validate()?;
    if source.num_classes() < 2 {
        return Err(Error::SingleClassData);
    }
    let own_s;
    let s_basis = match s_basis {
        Some(b) => b,
        None => {
            own_s = pca_basis(source.features(), params.d)?;
            &own_s.basis
        }
    };
    let mut per_class = Vec::with_capacity(source.num_classes());
    for class in 1..=source.num_classes() {
        let labels = source.binary_labels(class);
        let class_params = JcslHyperParams {
            seed: params.seed.wrapping_add(class as u64),
            ..params.clone()
        };
        per_class.push(train_binary_with_init(
            source.features(),
            &labels,
            t,
            s_basis.clone(),
            &class_params,
        )?);
    }
    Ok(JcslMulticlassModel {
        t: t.clone(),
        per_class,
        alpha: params.alpha,
        beta: params.beta,
    })
}

/// Scores each row against every class through the target basis only:
/// score_y = (x - mean_T)^T T w_y. Ties go to the lowest class id.
pub fn predict_jcsl(model: &JcslMulticlassModel, x: &FeatureMatrix) -> Result<Vec<usize>> {
    let proj = project(x, &model.t)?;
    let k = model.per_class.len();
    let mut scores = DMatrix::zeros(x.nrows(), k);
    for (j, bm) in model.per_class.iter().enumerate() {
        if bm.w.len() != model.t.dim() {
            return Err(Error::DimensionMismatch {
                context: "class weight length vs basis dimension",
                left: bm.w.len(),
                right: model.t.dim(),
            });
        }
        scores.set_column(j, &(proj.matrix() * &bm.w));
    }
    Ok(argmax_rows(&scores))
}

// ---------------------------------------------------------------------
// Model file format
//
// Line 1:            D d K alpha beta
// Lines 2..=D+1:     T row-major, d values per line
// Line D+2:          target mean, D values
// Then per class y:  one line with w_y (d values), one line with the
//                    final objective.
//
// All reals are written with 17 significant digits so a round trip is
// bit-exact. The per-class V matrices are not part of the file; loading
// reinitializes them to T (prediction never reads V).
// ---------------------------------------------------------------------

fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Serializes a multiclass model to the flat text format.
pub fn model_to_text(model: &JcslMulticlassModel) -> String {
    let dim = model.t.ambient_dim();
    let d = model.t.dim();
    let k = model.per_class.len();
    let mut out = String::new();
    out.push_str(&format!(
        "{} {} {} {} {}\n",
        dim,
        d,
        k,
        fmt(model.alpha),
        fmt(model.beta)
    ));
    for r in 0..dim {
        let row: Vec<String> = (0..d).map(|c| fmt(model.t.basis[(r, c)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    let mean: Vec<String> = model.t.mean.iter().map(|&v| fmt(v)).collect();
    out.push_str(&mean.join(" "));
    out.push('\n');
    for bm in &model.per_class {
        let w: Vec<String> = bm.w.iter().map(|&v| fmt(v)).collect();
        out.push_str(&w.join(" "));
        out.push('\n');
        out.push_str(&fmt(bm.final_objective));
        out.push('\n');
    }
    out
}

fn parse_floats(line: &str, expected: usize, what: &str) -> Result<Vec<f64>> {
    let vals: std::result::Result<Vec<f64>, _> =
        line.split_whitespace().map(str::parse::<f64>).collect();
    let vals = vals.map_err(|e| Error::InvalidModel(format!("{what}: {e}")))?;
    if vals.len() != expected {
        return Err(Error::InvalidModel(format!(
            "{what}: expected {expected} values, got {}",
            vals.len()
        )));
    }
    Ok(vals)
}

/// Parses the flat text format back into a model.
pub fn model_from_text(text: &str) -> Result<JcslMulticlassModel> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidModel("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 {
        return Err(Error::InvalidModel(format!(
            "header: expected 5 fields, got {}",
            fields.len()
        )));
    }
    let dim: usize = fields[0]
        .parse()
        .map_err(|_| Error::InvalidModel("header: bad D".into()))?;
    let d: usize = fields[1]
        .parse()
        .map_err(|_| Error::InvalidModel("header: bad d".into()))?;
    let k: usize = fields[2]
        .parse()
        .map_err(|_| Error::InvalidModel("header: bad K".into()))?;
    let alpha: f64 = fields[3]
        .parse()
        .map_err(|_| Error::InvalidModel("header: bad alpha".into()))?;
    let beta: f64 = fields[4]
        .parse()
        .map_err(|_| Error::InvalidModel("header: bad beta".into()))?;
    if dim == 0 || d == 0 || k == 0 {
        return Err(Error::InvalidModel("header: zero dimension".into()));
    }

    let mut basis = DMatrix::zeros(dim, d);
    for r in 0..dim {
        let line = lines
            .next()
            .ok_or_else(|| Error::InvalidModel(format!("missing basis row {r}")))?;
        let vals = parse_floats(line, d, &format!("basis row {r}"))?;
        for (c, v) in vals.into_iter().enumerate() {
            basis[(r, c)] = v;
        }
    }
    let mean_line = lines
        .next()
        .ok_or_else(|| Error::InvalidModel("missing mean line".into()))?;
    let mean = DVector::from_vec(parse_floats(mean_line, dim, "mean")?);
    let t = SubspaceBasis { basis, mean };

    let mut per_class = Vec::with_capacity(k);
    for y in 1..=k {
        let w_line = lines
            .next()
            .ok_or_else(|| Error::InvalidModel(format!("missing weights for class {y}")))?;
        let w = DVector::from_vec(parse_floats(w_line, d, &format!("class {y} weights"))?);
        let obj_line = lines
            .next()
            .ok_or_else(|| Error::InvalidModel(format!("missing objective for class {y}")))?;
        let obj = parse_floats(obj_line, 1, &format!("class {y} objective"))?[0];
        per_class.push(JcslBinaryModel {
            v: t.basis.clone(),
            w,
            final_objective: obj,
            iterations: 0,
        });
    }
    if lines.next().is_some_and(|l| !l.trim().is_empty()) {
        return Err(Error::InvalidModel("trailing content after model".into()));
    }
    Ok(JcslMulticlassModel {
        t,
        per_class,
        alpha,
        beta,
    })
}

pub fn save_model(model: &JcslMulticlassModel, path: &std::path::Path) -> Result<()> {
    std::fs::write(path, model_to_text(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &std::path::Path) -> Result<JcslMulticlassModel> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_matrix, random_orthonormal};

    fn toy_instance(seed: u64, n: usize, dim: usize, d: usize) -> (FeatureMatrix, Vec<f64>, SubspaceBasis) {
        let mut rng = SplitMix64::new(seed);
        let x = random_matrix(&mut rng, n, dim);
        let labels: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let t = random_orthonormal(&mut rng, dim, d);
        (x, labels, t)
    }

    #[test]
    fn objective_zero_weights_gives_beta_n() {
        let (x, labels, t) = toy_instance(1, 20, 5, 2);
        let v = t.basis.clone();
        let w = DVector::zeros(2);
        let obj = jcsl_objective(&v, &w, &t, &x, &labels, 3.0, 0.5).unwrap();
        assert!((obj - 0.5 * 20.0).abs() < 1e-12);
    }

    #[test]
    fn objective_reduces_to_weight_norm() {
        let (x, labels, t) = toy_instance(2, 15, 4, 2);
        let mut rng = SplitMix64::new(5);
        let v = DMatrix::from_fn(4, 2, |_, _| rng.next_normal());
        let w = DVector::from_vec(vec![0.3, -0.7]);
        let obj = jcsl_objective(&v, &w, &t, &x, &labels, 0.0, 0.0).unwrap();
        assert!((obj - w.norm_squared()).abs() < 1e-15);
    }

    #[test]
    fn objective_matches_loop_oracle() {
        let (x, labels, t) = toy_instance(3, 25, 6, 3);
        let mut rng = SplitMix64::new(9);
        let v = DMatrix::from_fn(6, 3, |_, _| rng.next_normal());
        let w = DVector::from_fn(3, |_, _| rng.next_normal());
        let (alpha, beta) = (0.1, 1.0);

        // fully explicit oracle
        let mut oracle = 0.0;
        for j in 0..3 {
            oracle += w[j] * w[j];
        }
        for r in 0..6 {
            for c in 0..3 {
                let diff = v[(r, c)] - t.basis[(r, c)];
                oracle += alpha * diff * diff;
            }
        }
        for i in 0..25 {
            let mut score = 0.0;
            for j in 0..3 {
                let mut p = 0.0;
                for k in 0..6 {
                    p += (x.matrix()[(i, k)] - t.mean[k]) * v[(k, j)];
                }
                score += p * w[j];
            }
            oracle += beta * (1.0 - score * labels[i]).max(0.0);
        }

        let got = jcsl_objective(&v, &w, &t, &x, &labels, alpha, beta).unwrap();
        assert!((got - oracle).abs() < 1e-10, "{got} vs {oracle}");
    }

    #[test]
    fn objective_rejects_non_binary_labels() {
        let (x, mut labels, t) = toy_instance(4, 10, 4, 2);
        labels[3] = 2.0;
        let v = t.basis.clone();
        let w = DVector::zeros(2);
        assert!(matches!(
            jcsl_objective(&v, &w, &t, &x, &labels, 1.0, 1.0),
            Err(Error::NonBinaryLabels { found }) if found == 2.0
        ));
    }

    #[test]
    fn subgradient_at_zero_weights_is_pure_divergence_pull() {
        let (x, labels, t) = toy_instance(5, 12, 5, 2);
        let mut rng = SplitMix64::new(11);
        let v = DMatrix::from_fn(5, 2, |_, _| rng.next_normal());
        let w = DVector::zeros(2);
        let (dv, dw) = jcsl_subgradients(&v, &w, &t, &x, &labels, 1.0, 2.0).unwrap();
        let expected_dv = (&v - &t.basis) * 2.0;
        assert!((dv - expected_dv).norm() < 1e-14);
        // dw = -beta sum y_i p_i with all samples active at w = 0
        let mut expected_dw = DVector::zeros(2);
        for i in 0..12 {
            for j in 0..2 {
                let mut p = 0.0;
                for k in 0..5 {
                    p += (x.matrix()[(i, k)] - t.mean[k]) * v[(k, j)];
                }
                expected_dw[j] -= 2.0 * labels[i] * p;
            }
        }
        assert!((dw - expected_dw).norm() < 1e-12);
    }

    #[test]
    fn inactive_hinge_leaves_regularizer_gradients() {
        // one sample with a huge positive margin
        let dim = 3;
        let t = SubspaceBasis {
            basis: DMatrix::identity(dim, 2),
            mean: DVector::zeros(dim),
        };
        let v = DMatrix::identity(dim, 2) * 1.5;
        let w = DVector::from_vec(vec![2.0, 2.0]);
        let x = FeatureMatrix::from_rows(&[vec![5.0, 5.0, 0.0]]).unwrap();
        let labels = vec![1.0]; // margin = (7.5 + 7.5) * 2 >> 1
        let (alpha, beta) = (0.7, 3.0);
        let (dv, dw) = jcsl_subgradients(&v, &w, &t, &x, &labels, alpha, beta).unwrap();
        assert!((dv - (&v - &t.basis) * (2.0 * alpha)).norm() < 1e-14);
        assert!((dw - &w * 2.0).norm() < 1e-14);
    }

    #[test]
    fn subgradients_match_finite_differences() {
        let (x, labels, t) = toy_instance(6, 10, 4, 2);
        let mut rng = SplitMix64::new(21);
        let v = DMatrix::from_fn(4, 2, |_, _| rng.next_normal());
        let w = DVector::from_fn(2, |_, _| rng.next_normal());
        let (alpha, beta) = (0.1, 1.0);

        // precondition: no margin within 1e-3 of 1 for this seed
        let vw = &v * &w;
        for i in 0..10 {
            let mut score = 0.0;
            for k in 0..4 {
                score += (x.matrix()[(i, k)] - t.mean[k]) * vw[k];
            }
            assert!((score * labels[i] - 1.0).abs() > 1e-3, "unlucky seed");
        }

        let (dv, dw) = jcsl_subgradients(&v, &w, &t, &x, &labels, alpha, beta).unwrap();
        let h = 1e-6;
        let eval = |v: &DMatrix<f64>, w: &DVector<f64>| {
            jcsl_objective(v, w, &t, &x, &labels, alpha, beta).unwrap()
        };
        for r in 0..4 {
            for c in 0..2 {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[(r, c)] += h;
                vm[(r, c)] -= h;
                let fd = (eval(&vp, &w) - eval(&vm, &w)) / (2.0 * h);
                let rel = (fd - dv[(r, c)]).abs() / dv[(r, c)].abs().max(1e-8);
                assert!(rel < 1e-5, "dV[{r},{c}]: fd {fd} vs {}", dv[(r, c)]);
            }
        }
        for j in 0..2 {
            let mut wp = w.clone();
            let mut wm = w.clone();
            wp[j] += h;
            wm[j] -= h;
            let fd = (eval(&v, &wp) - eval(&v, &wm)) / (2.0 * h);
            let rel = (fd - dw[j]).abs() / dw[j].abs().max(1e-8);
            assert!(rel < 1e-5, "dw[{j}]: fd {fd} vs {}", dw[j]);
        }
    }

    /// Two Gaussian clusters in the plane, separable with a wide margin.
    fn separable_instance(seed: u64, n_per: usize) -> (FeatureMatrix, Vec<f64>, FeatureMatrix) {
        let mut rng = SplitMix64::new(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n_per {
            rows.push(vec![5.0 + 0.3 * rng.next_normal(), 0.3 * rng.next_normal()]);
            labels.push(1.0);
            rows.push(vec![-5.0 + 0.3 * rng.next_normal(), 0.3 * rng.next_normal()]);
            labels.push(-1.0);
        }
        let mut target_rows = Vec::new();
        for _ in 0..n_per {
            target_rows.push(vec![5.0 + 0.3 * rng.next_normal(), 0.3 * rng.next_normal()]);
            target_rows.push(vec![-5.0 + 0.3 * rng.next_normal(), 0.3 * rng.next_normal()]);
        }
        (
            FeatureMatrix::from_rows(&rows).unwrap(),
            labels,
            FeatureMatrix::from_rows(&target_rows).unwrap(),
        )
    }

    /// Exact margin sweep over directions in the plane: the largest
    /// min-margin of any unit direction.
    fn best_margin_2d(points: &DMatrix<f64>, labels: &[f64]) -> f64 {
        let mut best = f64::NEG_INFINITY;
        for step in 0..36000 {
            let theta = step as f64 * std::f64::consts::PI / 18000.0;
            let (ux, uy) = (theta.cos(), theta.sin());
            let mut worst = f64::INFINITY;
            for (i, &y) in labels.iter().enumerate() {
                worst = worst.min(y * (points[(i, 0)] * ux + points[(i, 1)] * uy));
            }
            best = best.max(worst);
        }
        best
    }

    #[test]
    fn no_shift_pulls_v_to_t() {
        let (x, labels, _) = separable_instance(31, 30);
        let params = JcslHyperParams::new(10.0, 0.001, 2).with_seed(7);
        let t = pca_basis(&x, 2).unwrap(); // source == target sample
        let model = train_jcsl_binary(&x, &labels, &t, &params).unwrap();
        let rel = (&model.v - &t.basis).norm() / t.basis.norm();
        assert!(rel < 0.05, "relative divergence {rel}");
    }

    #[test]
    fn separable_after_projection_drives_hinge_down() {
        let (x, labels, target) = separable_instance(32, 50);
        let n = x.nrows();
        let t = pca_basis(&target, 2).unwrap();

        // oracle: instance separable with a comfortable margin after
        // projection onto T
        let projected = project(&x, &t).unwrap();
        let margin = best_margin_2d(projected.matrix(), &labels);
        assert!(margin > 1.0, "construction broke: margin {margin}");

        let params = JcslHyperParams::new(0.001, 10.0, 2).with_seed(3);
        let model = train_jcsl_binary(&x, &labels, &t, &params).unwrap();
        let hinge = {
            let obj = model.final_objective;
            let reg = model.w.norm_squared()
                + 0.001 * frobenius_distance_sq(&model.v, &t.basis).unwrap();
            (obj - reg) / 10.0
        };
        assert!(
            hinge < 0.01 * n as f64,
            "residual hinge {hinge} on {n} samples"
        );
    }

    #[test]
    fn training_is_bit_deterministic() {
        let (x, labels, target) = separable_instance(33, 20);
        let t = pca_basis(&target, 2).unwrap();
        let params = JcslHyperParams::new(1.0, 1.0, 2).with_seed(5);
        let a = train_jcsl_binary(&x, &labels, &t, &params).unwrap();
        let b = train_jcsl_binary(&x, &labels, &t, &params).unwrap();
        assert_eq!(a.v, b.v);
        assert_eq!(a.w, b.w);
        assert_eq!(a.final_objective, b.final_objective);
        assert_eq!(a.iterations, b.iterations);
    }

    #[test]
    fn descent_from_initial_objective() {
        let (x, labels, target) = separable_instance(34, 25);
        let t = pca_basis(&target, 2).unwrap();
        let s = pca_basis(&x, 2).unwrap();
        for &(alpha, beta) in &[(0.1, 1.0), (1.0, 0.1), (0.01, 10.0)] {
            let params = JcslHyperParams::new(alpha, beta, 2).with_seed(8);
            let model = train_jcsl_binary(&x, &labels, &t, &params).unwrap();
            let initial = jcsl_objective(
                &s.basis,
                &DVector::zeros(2),
                &t,
                &x,
                &labels,
                alpha,
                beta,
            )
            .unwrap();
            assert!(
                model.final_objective <= initial + 1e-9,
                "alpha={alpha} beta={beta}: {} > {initial}",
                model.final_objective
            );
        }
    }

    fn three_class_instance(seed: u64) -> (LabeledDataset, FeatureMatrix) {
        let mut rng = SplitMix64::new(seed);
        let centers = [[6.0, 0.0, 0.0], [0.0, 6.0, 0.0], [0.0, 0.0, 6.0]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut target_rows = Vec::new();
        for (ci, c) in centers.iter().enumerate() {
            for _ in 0..15 {
                rows.push(vec![
                    c[0] + rng.next_normal(),
                    c[1] + rng.next_normal(),
                    c[2] + rng.next_normal(),
                ]);
                labels.push(ci + 1);
                target_rows.push(vec![
                    c[0] + rng.next_normal(),
                    c[1] + rng.next_normal(),
                    c[2] + rng.next_normal(),
                ]);
            }
        }
        (
            LabeledDataset::new(FeatureMatrix::from_rows(&rows).unwrap(), labels).unwrap(),
            FeatureMatrix::from_rows(&target_rows).unwrap(),
        )
    }

    #[test]
    fn one_vs_all_labels_negate_for_two_classes() {
        let features = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let data = LabeledDataset::new(features, vec![1, 2, 1]).unwrap();
        let l1 = data.binary_labels(1);
        let l2 = data.binary_labels(2);
        for (a, b) in l1.iter().zip(l2.iter()) {
            assert_eq!(*a, -*b);
        }
    }

    #[test]
    fn multiclass_no_shift_keeps_every_v_near_t() {
        let (source, _) = three_class_instance(40);
        let target = source.features().clone();
        let mut params = JcslHyperParams::new(10.0, 0.001, 2).with_seed(1);
        params.max_iters = 100;
        let model = train_jcsl(&source, &target, &params).unwrap();
        for (y, bm) in model.per_class.iter().enumerate() {
            let rel = (&bm.v - &model.t.basis).norm() / model.t.basis.norm();
            assert!(rel < 0.05, "class {}: {rel}", y + 1);
        }
    }

    #[test]
    fn predict_zero_weights_ties_to_class_one() {
        let (source, target) = three_class_instance(41);
        let params = JcslHyperParams::new(1.0, 1.0, 2).with_seed(2);
        let mut model = train_jcsl(&source, &target, &params).unwrap();
        for bm in model.per_class.iter_mut() {
            bm.w = DVector::zeros(2);
        }
        let preds = predict_jcsl(&model, &target).unwrap();
        assert!(preds.iter().all(|&p| p == 1));
    }

    #[test]
    fn predict_invariant_to_common_weight_scaling_and_ignores_v() {
        let (source, target) = three_class_instance(42);
        let params = JcslHyperParams::new(0.1, 1.0, 2).with_seed(3);
        let model = train_jcsl(&source, &target, &params).unwrap();
        let base = predict_jcsl(&model, &target).unwrap();

        let mut scaled = model.clone();
        for bm in scaled.per_class.iter_mut() {
            bm.w *= 3.0;
        }
        assert_eq!(base, predict_jcsl(&scaled, &target).unwrap());

        let mut gutted = model.clone();
        for bm in gutted.per_class.iter_mut() {
            bm.v = DMatrix::zeros(3, 2);
        }
        assert_eq!(base, predict_jcsl(&gutted, &target).unwrap());
    }

    #[test]
    fn predict_matches_score_loop_oracle() {
        let (source, target) = three_class_instance(43);
        let params = JcslHyperParams::new(0.1, 1.0, 2).with_seed(4);
        let model = train_jcsl(&source, &target, &params).unwrap();
        let preds = predict_jcsl(&model, &target).unwrap();
        for i in 0..target.nrows() {
            let mut best = 0usize;
            let mut best_score = f64::NEG_INFINITY;
            for (y, bm) in model.per_class.iter().enumerate() {
                let mut s = 0.0;
                for j in 0..model.t.dim() {
                    let mut proj = 0.0;
                    for k in 0..target.ncols() {
                        proj += (target.matrix()[(i, k)] - model.t.mean[k])
                            * model.t.basis[(k, j)];
                    }
                    s += proj * bm.w[j];
                }
                if s > best_score {
                    best_score = s;
                    best = y;
                }
            }
            assert_eq!(preds[i], best + 1, "row {i}");
        }
    }

    #[test]
    fn model_text_round_trip_is_bit_exact() {
        let (source, target) = three_class_instance(44);
        let params = JcslHyperParams::new(0.01, 1.0, 2).with_seed(5);
        let model = train_jcsl(&source, &target, &params).unwrap();
        let text = model_to_text(&model);
        let back = model_from_text(&text).unwrap();
        assert_eq!(back.t.basis, model.t.basis);
        assert_eq!(back.t.mean, model.t.mean);
        assert_eq!(back.alpha, model.alpha);
        assert_eq!(back.beta, model.beta);
        for (a, b) in back.per_class.iter().zip(model.per_class.iter()) {
            assert_eq!(a.w, b.w);
            assert_eq!(a.final_objective, b.final_objective);
        }
        // and the text itself is stable
        let mut round = back;
        for (rt, orig) in round.per_class.iter_mut().zip(model.per_class.iter()) {
            rt.v = orig.v.clone(); // v is not serialized
        }
        assert_eq!(model_to_text(&round), text);

        // loaded models predict identically
        let reloaded = model_from_text(&text).unwrap();
        assert_eq!(
            predict_jcsl(&model, &target).unwrap(),
            predict_jcsl(&reloaded, &target).unwrap()
        );
    }

    #[test]
    fn model_from_text_rejects_truncation() {
        let (source, target) = three_class_instance(45);
        let params = JcslHyperParams::new(0.01, 1.0, 2).with_seed(6);
        let model = train_jcsl(&source, &target, &params).unwrap();
        let text = model_to_text(&model);
        let truncated: String = text.lines().take(3).collect::<Vec<_>>().join("\n");
        assert!(model_from_text(&truncated).is_err());
    }
}
