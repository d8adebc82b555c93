//! Empirical domain-divergence estimation: train a linear classifier to
//! tell the two domains apart and report its held-out accuracy. Chance
//! level (0.5) means the domains are indistinguishable in the given
//! representation; high accuracy means high divergence.

use crate::error::{Error, Result};
use crate::jcsl::JcslMulticlassModel;
use crate::linalg::{center_rows, project, FeatureMatrix};
use crate::rng::SplitMix64;
use crate::svm::{predict, train_linear_svm, LabeledDataset};

/// Domain-separator test accuracy plus the sample counts used.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    /// Held-out accuracy of the domain separator, in [0, 1].
    pub accuracy: f64,
    pub n_source: usize,
    pub n_target: usize,
    /// Representation tag: original | sa | jcsl | pca_t.
    pub representation: String,
}

impl DivergenceReport {
    pub fn with_representation(mut self, tag: &str) -> Self {
        tag.clone_into(&mut self.representation);
        self
    }

    /// One CSV line: representation, accuracy, n_source, n_target, seed.
    pub fn to_csv_line(&self, seed: u64) -> String {
        format!(
            "{},{},{},{},{}",
            self.representation, self.accuracy, self.n_source, self.n_target, seed
        )
    }
}

/// Trains the domain separator on half of each domain and reports its
/// accuracy on the other half.
///
/// The larger domain is first subsampled (seeded, without replacement) to
/// the smaller one's size so that 0.5 is the true chance level; each
/// domain is then split into seeded halves, the extra sample of an odd
/// count going to the training half. Source rows are pseudo-labeled +1,
/// target rows -1.
pub fn h_delta_h(
    source_repr: &FeatureMatrix,
    target_repr: &FeatureMatrix,
    c: f64,
    seed: u64,
) -> Result<DivergenceReport> {
    if source_repr.ncols() != target_repr.ncols() {
        return Err(Error::DimensionMismatch {
            context: "source vs target representation width",
            left: source_repr.ncols(),
            right: target_repr.ncols(),
        });
    }
    for (name, m) in [("source", source_repr), ("target", target_repr)] {
        if m.nrows() < 4 {
            return Err(Error::TooFewSamples {
                context: if name == "source" {
                    "divergence source domain"
                } else {
                    "divergence target domain"
                },
                needed: 4,
                got: m.nrows(),
            });
        }
    }

    let mut rng = SplitMix64::new(seed);
    let m = source_repr.nrows().min(target_repr.nrows());

    let pick = |rng: &mut SplitMix64, n: usize| -> Vec<usize> {
        if n > m {
            rng.sample_without_replacement(n, m)
        } else {
            (0..n).collect()
        }
    };
    let source_idx = pick(&mut rng, source_repr.nrows());
    let target_idx = pick(&mut rng, target_repr.nrows());
    let source = source_repr.select_rows(&source_idx);
    let target = target_repr.select_rows(&target_idx);

    // seeded half split per domain; train half takes the odd sample
    let split = |rng: &mut SplitMix64| -> (Vec<usize>, Vec<usize>) {
        let perm = rng.permutation(m);
        let cut = m.div_ceil(2);
        (perm[..cut].to_vec(), perm[cut..].to_vec())
    };
    let (s_train, s_test) = split(&mut rng);
    let (t_train, t_test) = split(&mut rng);

    let train_features = source
        .select_rows(&s_train)
        .vstack(&target.select_rows(&t_train))?;
    let mut train_labels = vec![1usize; s_train.len()];
    train_labels.extend(std::iter::repeat_n(2usize, t_train.len()));
    let train = LabeledDataset::new(train_features, train_labels)?;

    let test_features = source
        .select_rows(&s_test)
        .vstack(&target.select_rows(&t_test))?;
    let mut test_labels = vec![1usize; s_test.len()];
    test_labels.extend(std::iter::repeat_n(2usize, t_test.len()));

    let model = train_linear_svm(&train, c, rng.next_u64())?;
    let preds = predict(&model, &test_features)?;
    let hits = preds
        .iter()
        .zip(test_labels.iter())
        .filter(|(p, a)| p == a)
        .count();

    Ok(DivergenceReport {
        accuracy: hits as f64 / test_labels.len() as f64,
        n_source: m,
        n_target: m,
        representation: "original".to_string(),
    })
}

/// Per-class divergence for a trained one-vs-all model, averaged over
/// classes: class y compares the source through V_y against the target
/// through T, both centered by the target mean, using all the data for
/// every class.
pub fn h_delta_h_jcsl(
    model: &JcslMulticlassModel,
    source: &FeatureMatrix,
    target: &FeatureMatrix,
    c: f64,
    seed: u64,
) -> Result<DivergenceReport> {
    if model.per_class.is_empty() {
        return Err(Error::SingleClassData);
    }
    let target_repr = project(target, &model.t)?;
    let source_centered = center_rows(source.matrix(), &model.t.mean);
    let mut total = 0.0;
    let mut n_source = 0;
    let mut n_target = 0;
    for bm in &model.per_class {
        if bm.v.nrows() != source.ncols() {
            return Err(Error::DimensionMismatch {
                context: "source ambient dimension vs V rows",
                left: source.ncols(),
                right: bm.v.nrows(),
            });
        }
        let source_repr = FeatureMatrix::new(&source_centered * &bm.v)?;
        let report = h_delta_h(&source_repr, &target_repr, c, seed)?;
        total += report.accuracy;
        n_source = report.n_source;
        n_target = report.n_target;
    }
    Ok(DivergenceReport {
        accuracy: total / model.per_class.len() as f64,
        n_source,
        n_target,
        representation: "jcsl".to_string(),
    })
}
