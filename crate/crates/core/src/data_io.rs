//! Dataset ingestion, normalization, and the seeded synthetic
//! shifted-domain generator.
//!
//! CSV dialect: comma-separated, one header row, `.` decimal separator,
//! UTF-8, LF line endings, no quoting. The label column is named
//! `label` by convention and holds integers; labels are remapped to
//! contiguous ids 1..=K in ascending order of the original values.
//!
//! All randomness comes from [`SplitMix64`](crate::rng::SplitMix64)
//! (Gaussians via Box-Muller), so a synthetic dataset is reproducible
//! from its spec and seed alone.

use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::FeatureMatrix;
use crate::rng::SplitMix64;
use crate::svm::LabeledDataset;

/// Original-label -> contiguous-id pairs, ascending by original value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMapping {
    pub pairs: Vec<(i64, usize)>,
}

impl LabelMapping {
    pub fn to_contiguous(&self, original: i64) -> Option<usize> {
        self.pairs
            .iter()
            .find(|(o, _)| *o == original)
            .map(|(_, c)| *c)
    }

    pub fn to_original(&self, contiguous: usize) -> Option<i64> {
        self.pairs
            .iter()
            .find(|(_, c)| *c == contiguous)
            .map(|(o, _)| *o)
    }
}

/// Result of [`load_csv`]: labeled when a label column was requested.
#[derive(Debug, Clone)]
pub enum CsvData {
    Labeled {
        data: LabeledDataset,
        mapping: LabelMapping,
    },
    Unlabeled(FeatureMatrix),
}

impl CsvData {
    pub fn features(&self) -> &FeatureMatrix {
        match self {
            CsvData::Labeled { data, .. } => data.features(),
            CsvData::Unlabeled(f) => f,
        }
    }
}

/// Header row of a CSV file.
pub fn csv_header(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let first = text.lines().next().ok_or(Error::ParseError {
        line: 1,
        message: "empty file".into(),
    })?;
    Ok(split_fields(first).map(str::to_string).collect())
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.strip_suffix('\r').unwrap_or(line).split(',')
}

/// Parses a numeric CSV table. With `label_column = Some(name)` that
/// column must exist, hold integers, and is remapped to contiguous class
/// ids; row order is preserved either way.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<CsvData> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv_text(&text, label_column)
}

pub(crate) fn parse_csv_text(text: &str, label_column: Option<&str>) -> Result<CsvData> {
    let mut lines = text.lines().enumerate();
    let (_, header_line) = lines.next().ok_or(Error::ParseError {
        line: 1,
        message: "empty file".into(),
    })?;
    let header: Vec<&str> = split_fields(header_line).collect();
    let n_fields = header.len();

    let label_idx = match label_column {
        Some(name) => Some(header.iter().position(|h| *h == name).ok_or_else(|| {
            Error::ParseError {
                line: 1,
                message: format!("no column named '{name}' in header"),
            }
        })?),
        None => None,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    for (idx, raw_line) in lines {
        let line_no = idx + 1; // enumerate is 0-based over all lines
        if raw_line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = split_fields(raw_line).collect();
        if fields.len() != n_fields {
            return Err(Error::RaggedRows {
                line: line_no,
                got: fields.len(),
                expected: n_fields,
            });
        }
        let mut row = Vec::with_capacity(n_fields - usize::from(label_idx.is_some()));
        for (col, field) in fields.iter().enumerate() {
            if Some(col) == label_idx {
                let label: i64 = field.trim().parse().map_err(|_| Error::NonIntegerLabel {
                    line: line_no,
                    value: field.to_string(),
                })?;
                raw_labels.push(label);
            } else {
                let value: f64 = field.trim().parse().map_err(|_| Error::ParseError {
                    line: line_no,
                    message: format!("non-numeric value '{field}' in column '{}'", header[col]),
                })?;
                if !value.is_finite() {
                    return Err(Error::ParseError {
                        line: line_no,
                        message: format!("non-finite value '{field}' in column '{}'", header[col]),
                    });
                }
                row.push(value);
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::ParseError {
            line: 1,
            message: "no data rows".into(),
        });
    }

    let features = FeatureMatrix::from_rows(&rows)?;
    match label_idx {
        None => Ok(CsvData::Unlabeled(features)),
        Some(_) => {
            let mut distinct: Vec<i64> = raw_labels.clone();
            distinct.sort_unstable();
            distinct.dedup();
            let mapping = LabelMapping {
                pairs: distinct.iter().enumerate().map(|(i, &o)| (o, i + 1)).collect(),
            };
            let labels: Vec<usize> = raw_labels
                .iter()
                .map(|o| mapping.to_contiguous(*o).expect("built from distinct"))
                .collect();
            let data = LabeledDataset::new(features, labels)?;
            Ok(CsvData::Labeled { data, mapping })
        }
    }
}

fn fmt(v: f64) -> String {
    format!("{:.16e}", v)
}

/// Writes features (and optionally labels) back out in the same dialect,
/// with 17 significant digits so load ∘ save is the identity.
pub fn save_labeled_csv(path: &Path, data: &LabeledDataset) -> Result<()> {
    let mut out = String::new();
    let d = data.features().ncols();
    for j in 0..d {
        out.push_str(&format!("f{},", j + 1));
    }
    out.push_str("label\n");
    for i in 0..data.len() {
        for j in 0..d {
            out.push_str(&fmt(data.features().matrix()[(i, j)]));
            out.push(',');
        }
        out.push_str(&data.labels()[i].to_string());
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn save_features_csv(path: &Path, features: &FeatureMatrix) -> Result<()> {
    let mut out = String::new();
    let d = features.ncols();
    let header: Vec<String> = (1..=d).map(|j| format!("f{j}")).collect();
    out.push_str(&header.join(","));
    out.push('\n');
    for i in 0..features.nrows() {
        let row: Vec<String> = (0..d).map(|j| fmt(features.matrix()[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

// ---------------------------------------------------------------------
// z-score normalization
// ---------------------------------------------------------------------

/// Columns with a standard deviation below this are centered but not
/// scaled.
const ZSCORE_EPS: f64 = 1e-12;

/// Per-column affine transform fit on one matrix and applied to others.
/// Standard deviations are population (1/n).
#[derive(Debug, Clone, PartialEq)]
pub struct ZScoreTransform {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns that were near-constant in the fitting data.
    pub degenerate: Vec<usize>,
}

pub fn zscore_fit(train: &FeatureMatrix) -> Result<ZScoreTransform> {
    let n = train.nrows();
    if n < 2 {
        return Err(Error::TooFewSamples {
            context: "z-score fitting",
            needed: 2,
            got: n,
        });
    }
    let d = train.ncols();
    let mut means = Vec::with_capacity(d);
    let mut stds = Vec::with_capacity(d);
    let mut degenerate = Vec::new();
    for j in 0..d {
        let col = train.matrix().column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        means.push(mean);
        if std < ZSCORE_EPS {
            stds.push(1.0);
            degenerate.push(j);
        } else {
            stds.push(std);
        }
    }
    Ok(ZScoreTransform {
        means,
        stds,
        degenerate,
    })
}

pub fn zscore_apply(t: &ZScoreTransform, x: &FeatureMatrix) -> Result<FeatureMatrix> {
    if x.ncols() != t.means.len() {
        return Err(Error::DimensionMismatch {
            context: "z-score transform width",
            left: x.ncols(),
            right: t.means.len(),
        });
    }
    let mut data = x.matrix().clone();
    for j in 0..t.means.len() {
        let mut col = data.column_mut(j);
        for v in col.iter_mut() {
            *v = (*v - t.means[j]) / t.stds[j];
        }
    }
    Ok(FeatureMatrix { data })
}

/// Fits on `train` and applies the same transform to `train` and every
/// matrix in `others`.
pub fn zscore_fit_apply(
    train: &FeatureMatrix,
    others: &[&FeatureMatrix],
) -> Result<(FeatureMatrix, Vec<FeatureMatrix>, ZScoreTransform)> {
    let t = zscore_fit(train)?;
    let train_n = zscore_apply(&t, train)?;
    let others_n = others
        .iter()
        .map(|m| zscore_apply(&t, m))
        .collect::<Result<Vec<_>>>()?;
    Ok((train_n, others_n, t))
}

impl ZScoreTransform {
    /// Sidecar text: a comment header, then one `mean,std` line per column.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# zscore transform, population std, one column per line: mean,std\n");
        for (m, s) in self.means.iter().zip(self.stds.iter()) {
            out.push_str(&format!("{},{}\n", fmt(*m), fmt(*s)));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<ZScoreTransform> {
        let mut means = Vec::new();
        let mut stds = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            if parts.len() != 2 {
                return Err(Error::ParseError {
                    line: idx + 1,
                    message: "expected 'mean,std'".into(),
                });
            }
            let m: f64 = parts[0].trim().parse().map_err(|_| Error::ParseError {
                line: idx + 1,
                message: format!("bad mean '{}'", parts[0]),
            })?;
            let s: f64 = parts[1].trim().parse().map_err(|_| Error::ParseError {
                line: idx + 1,
                message: format!("bad std '{}'", parts[1]),
            })?;
            means.push(m);
            stds.push(s);
        }
        if means.is_empty() {
            return Err(Error::ParseError {
                line: 1,
                message: "no transform rows".into(),
            });
        }
        Ok(ZScoreTransform {
            means,
            stds,
            degenerate: Vec::new(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<ZScoreTransform> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        ZScoreTransform::from_text(&text)
    }
}

/// Scales every nonzero row to unit Euclidean norm; zero rows pass
/// through.
pub fn l2_normalize_rows(x: &FeatureMatrix) -> FeatureMatrix {
    let mut data = x.matrix().clone();
    for mut row in data.row_iter_mut() {
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in row.iter_mut() {
                *v /= norm;
            }
        }
    }
    FeatureMatrix { data }
}

// ---------------------------------------------------------------------
// Synthetic shifted-domain generator
// ---------------------------------------------------------------------

/// Spec for a pair of domains: isotropic Gaussian class clusters whose
/// centers sit equally phased on a circle in the first two ambient
/// coordinates (seeded phase, radius set so the minimum pairwise center
/// distance equals `class_separation`); the target draw is rotated in
/// those same two coordinates and then translated. Keeping the class
/// signal in the rotated plane is what makes the shift bite; equal center
/// radii keep the one-vs-all class scores comparable.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticShiftSpec {
    pub classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub class_separation: f64,
    pub rotation_angle: f64,
    pub translation: Vec<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SyntheticShiftSpec {
    /// The desk-scale benchmark configuration: 3 classes, 60 samples per
    /// class per domain, 20 dimensions, separation 4, a 30-degree rotation
    /// in the first two coordinates, a norm-2 translation along the first
    /// axis, unit noise.
    pub fn default_benchmark() -> Self {
        let dim = 20;
        let mut translation = vec![0.0; dim];
        translation[0] = 2.0;
        SyntheticShiftSpec {
            classes: 3,
            per_class: 60,
            dim,
            class_separation: 4.0,
            rotation_angle: std::f64::consts::FRAC_PI_6,
            translation,
            noise_sigma: 1.0,
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidSpec(msg));
        if self.classes < 2 {
            return bad(format!("classes must be >= 2, got {}", self.classes));
        }
        if self.per_class < 4 {
            return bad(format!("per_class must be >= 4, got {}", self.per_class));
        }
        if self.dim < 2 {
            return bad(format!(
                "dim must be >= 2 (rotation and class centers need two coordinates), got {}",
                self.dim
            ));
        }
        if !(self.noise_sigma > 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be finite and > 0".into());
        }
        if self.translation.len() != self.dim {
            return bad(format!(
                "translation length {} != dim {}",
                self.translation.len(),
                self.dim
            ));
        }
        if !self.class_separation.is_finite() || !self.rotation_angle.is_finite() {
            return bad("class_separation and rotation_angle must be finite".into());
        }
        if self.translation.iter().any(|v| !v.is_finite()) {
            return bad("translation must be finite".into());
        }
        Ok(())
    }
}

/// Draws (source, target) from the spec. Target labels are returned for
/// evaluation only; adaptation code must never see them.
pub fn synth_shift(spec: &SyntheticShiftSpec) -> Result<(LabeledDataset, LabeledDataset)> {
    spec.validate()?;
    let mut rng = SplitMix64::new(spec.seed);

    // class centers: equally phased on a circle in the first two
    // coordinates, scaled so min pairwise distance = class_separation
    let phase = rng.next_f64() * 2.0 * std::f64::consts::PI;
    let raw: Vec<(f64, f64)> = (0..spec.classes)
        .map(|i| {
            let theta =
                phase + 2.0 * std::f64::consts::PI * i as f64 / spec.classes as f64;
            (theta.cos(), theta.sin())
        })
        .collect();
    let mut min_dist = f64::INFINITY;
    for i in 0..raw.len() {
        for j in (i + 1)..raw.len() {
            let (dx, dy) = (raw[i].0 - raw[j].0, raw[i].1 - raw[j].1);
            min_dist = min_dist.min((dx * dx + dy * dy).sqrt());
        }
    }
    let scale = spec.class_separation / min_dist;
    let centers: Vec<Vec<f64>> = raw
        .iter()
        .map(|&(x, y)| {
            let mut c = vec![0.0; spec.dim];
            c[0] = scale * x;
            c[1] = scale * y;
            c
        })
        .collect();

    let draw_domain = |rng: &mut SplitMix64, shifted: bool| -> (Vec<Vec<f64>>, Vec<usize>) {
        let (cos_a, sin_a) = (spec.rotation_angle.cos(), spec.rotation_angle.sin());
        let mut rows = Vec::with_capacity(spec.classes * spec.per_class);
        let mut labels = Vec::with_capacity(spec.classes * spec.per_class);
        for (ci, center) in centers.iter().enumerate() {
            for _ in 0..spec.per_class {
                let mut x: Vec<f64> = center
                    .iter()
                    .map(|c| c + spec.noise_sigma * rng.next_normal())
                    .collect();
                if shifted {
                    let (x0, x1) = (x[0], x[1]);
                    x[0] = cos_a * x0 - sin_a * x1;
                    x[1] = sin_a * x0 + cos_a * x1;
                    for (v, t) in x.iter_mut().zip(spec.translation.iter()) {
                        *v += t;
                    }
                }
                rows.push(x);
                labels.push(ci + 1);
            }
        }
        (rows, labels)
    };

    let (source_rows, source_labels) = draw_domain(&mut rng, false);
    let (target_rows, target_labels) = draw_domain(&mut rng, true);
    let source = LabeledDataset::new(FeatureMatrix::from_rows(&source_rows)?, source_labels)?;
    let target = LabeledDataset::new(FeatureMatrix::from_rows(&target_rows)?, target_labels)?;
    Ok((source, target))
}

// ---------------------------------------------------------------------
// Benchmark spec files: key=value lines, '#' comments
// ---------------------------------------------------------------------

/// Parses a key=value spec file. Unset keys fall back to the default
/// benchmark values; `translation_norm` is shorthand for a vector of that
/// norm along the first axis.
pub fn parse_spec_text(text: &str) -> Result<SyntheticShiftSpec> {
    let mut spec = SyntheticShiftSpec::default_benchmark();
    let mut translation: Option<Vec<f64>> = None;
    let mut translation_norm: Option<f64> = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| Error::InvalidSpec(format!(
            "line {}: expected key=value, got '{line}'",
            idx + 1
        )))?;
        let key = key.trim();
        let value = value.trim();
        let parse_usize = |v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::InvalidSpec(format!("line {}: bad integer '{v}'", idx + 1)))
        };
        let parse_f64 = |v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::InvalidSpec(format!("line {}: bad number '{v}'", idx + 1)))
        };
        match key {
            "classes" => spec.classes = parse_usize(value)?,
            "per_class" => spec.per_class = parse_usize(value)?,
            "dim" => spec.dim = parse_usize(value)?,
            "class_separation" => spec.class_separation = parse_f64(value)?,
            "rotation_angle" => spec.rotation_angle = parse_f64(value)?,
            "noise_sigma" => spec.noise_sigma = parse_f64(value)?,
            "seed" => {
                spec.seed = value.parse().map_err(|_| {
                    Error::InvalidSpec(format!("line {}: bad seed '{value}'", idx + 1))
                })?
            }
            "translation" => {
                let vals: Result<Vec<f64>> = value.split(',').map(|v| parse_f64(v.trim())).collect();
                translation = Some(vals?);
            }
            "translation_norm" => translation_norm = Some(parse_f64(value)?),
            other => {
                return Err(Error::InvalidSpec(format!(
                    "line {}: unknown key '{other}'",
                    idx + 1
                )))
            }
        }
    }

    spec.translation = match (translation, translation_norm) {
        (Some(v), None) => v,
        (None, Some(norm)) => {
            let mut t = vec![0.0; spec.dim];
            t[0] = norm;
            t
        }
        (None, None) => {
            let mut t = vec![0.0; spec.dim];
            t[0] = 2.0;
            t
        }
        (Some(_), Some(_)) => {
            return Err(Error::InvalidSpec(
                "give either translation or translation_norm, not both".into(),
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

pub fn load_spec(path: &Path) -> Result<SyntheticShiftSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_spec_text(&text)
}
