//! Synthetic multi-label data and the on-disk CSV format.
//!
//! Labels come from a random linear teacher: each class has a unit-norm
//! weight vector, features are standard normal, and a per-class bias is set
//! from the empirical margin quantile so that class `j` is positive on a
//! chosen fraction of the training rows. Rows that end up with no positive
//! get their highest-margin class switched on.
//!
//! CSV layout (UTF-8, LF, no quoting):
//!
//! ```text
//! id,f0,...,f{d-1},y0,...,y{L-1}
//! ```
//!
//! Label columns hold `1`/`0` in ground-truth files and `1`/`0`/`-1`
//! (positive / negative / unobserved) in observation files.

use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::labels::{GroundTruthMatrix, Observation, ObservationMatrix, SeededRng};
use crate::ndcore::MlpParams;

pub const TRAIN_FILE: &str = "train.csv";
pub const TEST_FILE: &str = "test.csv";
pub const TEACHER_FILE: &str = "teacher.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Training rows.
    pub n_images: usize,
    /// Test rows, drawn from the same teacher.
    pub n_test: usize,
    pub n_features: usize,
    pub n_classes: usize,
    /// Mean number of positives per image.
    pub target_label_cardinality: f64,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_images: 2000,
            n_test: 1000,
            n_features: 20,
            n_classes: 10,
            target_label_cardinality: 2.5,
            noise_std: 0.1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_images == 0 || self.n_test == 0 || self.n_features == 0 || self.n_classes == 0 {
            return Err(Error::InvalidArgument(
                "n_images, n_test, n_features and n_classes must be positive".into(),
            ));
        }
        let c = self.target_label_cardinality;
        if !(c >= 1.0 && c <= self.n_classes as f64) {
            return Err(Error::InvalidArgument(format!(
                "label cardinality {c} is infeasible for {} classes",
                self.n_classes
            )));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise_std must be non-negative, got {}",
                self.noise_std
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Vec<u64>,
    pub n_features: usize,
    /// Row-major `N × d`.
    pub features: Vec<f64>,
    pub gt: GroundTruthMatrix,
    pub split: Split,
}

impl Dataset {
    pub fn new(
        ids: Vec<u64>,
        n_features: usize,
        features: Vec<f64>,
        gt: GroundTruthMatrix,
        split: Split,
    ) -> Result<Self> {
        check_len("dataset ids", gt.n_rows(), ids.len())?;
        check_len("dataset features", gt.n_rows() * n_features, features.len())?;
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite feature value".into()));
        }
        Ok(Self {
            ids,
            n_features,
            features,
            gt,
            split,
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn n_classes(&self) -> usize {
        self.gt.n_classes()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn mean_cardinality(&self) -> f64 {
        self.gt.as_slice().iter().filter(|&&b| b).count() as f64 / self.len().max(1) as f64
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub train: Dataset,
    pub test: Dataset,
    pub teacher: MlpParams,
}

pub fn generate(spec: &SyntheticSpec) -> Result<Generated> {
    spec.validate()?;
    let (d, l) = (spec.n_features, spec.n_classes);
    let mut rng = SeededRng::new(spec.seed);

    let mut weights = vec![0.0; l * d];
    for row in weights.chunks_mut(d) {
        for w in row.iter_mut() {
            *w = StandardNormal.sample(&mut rng);
        }
        let norm = row
            .iter()
            .map(|w| w * w)
            .sum::<f64>()
            .sqrt()
            .max(f64::MIN_POSITIVE);
        row.iter_mut().for_each(|w| *w /= norm);
    }

    // per-class prevalence, uneven but summing to the target cardinality
    let spread: Vec<f64> = (0..l).map(|_| rng.random_range(0.5..1.5)).collect();
    let total: f64 = spread.iter().sum();
    let prevalence: Vec<f64> = spread
        .iter()
        .map(|u| (u / total * spec.target_label_cardinality).clamp(0.01, 0.95))
        .collect();

    let noise =
        Normal::new(0.0, spec.noise_std).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut draw = |n: usize| -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let x: Vec<f64> = (0..n * d)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        let margins: Vec<f64> = x
            .chunks(d)
            .flat_map(|xi| {
                weights
                    .chunks(d)
                    .map(move |w| w.iter().zip(xi).map(|(a, b)| a * b).sum::<f64>())
            })
            .collect();
        let eps: Vec<f64> = (0..n * l).map(|_| noise.sample(&mut rng)).collect();
        (x, margins, eps)
    };
    let (x_train, m_train, e_train) = draw(spec.n_images);
    let (x_test, m_test, e_test) = draw(spec.n_test);

    let bias: Vec<f64> = (0..l)
        .map(|j| {
            let mut col: Vec<f64> = (0..spec.n_images)
                .map(|i| m_train[i * l + j] + e_train[i * l + j])
                .collect();
            col.sort_by(f64::total_cmp);
            -upper_quantile(&col, prevalence[j])
        })
        .collect();

    let label = |margins: &[f64], eps: &[f64], n: usize| -> Result<GroundTruthMatrix> {
        let mut labels = vec![false; n * l];
        for i in 0..n {
            let row = i * l..(i + 1) * l;
            let mut best = (0, f64::NEG_INFINITY);
            for j in 0..l {
                let clean = margins[row.start + j] + bias[j];
                labels[row.start + j] = clean + eps[row.start + j] > 0.0;
                if clean > best.1 {
                    best = (j, clean);
                }
            }
            if !labels[row].contains(&true) {
                labels[i * l + best.0] = true;
            }
        }
        GroundTruthMatrix::new(n, l, labels)
    };

    let train = Dataset::new(
        (0..spec.n_images as u64).collect(),
        d,
        x_train,
        label(&m_train, &e_train, spec.n_images)?,
        Split::Train,
    )?;
    let offset = spec.n_images as u64;
    let test = Dataset::new(
        (offset..offset + spec.n_test as u64).collect(),
        d,
        x_test,
        label(&m_test, &e_test, spec.n_test)?,
        Split::Test,
    )?;

    let mut teacher = MlpParams::zeros(d, 0, l);
    teacher.w2 = weights;
    teacher.b2 = bias;
    Ok(Generated {
        train,
        test,
        teacher,
    })
}

/// Threshold that a fraction `p` of the sorted values lies strictly above.
fn upper_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let above = ((p * n as f64).round() as usize).clamp(1, n);
    let k = n - above;
    if k == 0 {
        sorted[0] - 1.0
    } else {
        0.5 * (sorted[k - 1] + sorted[k])
    }
}

fn write_rows(
    path: &Path,
    ids: &[u64],
    n_features: usize,
    features: &[f64],
    n_classes: usize,
    label_of: impl Fn(usize, usize) -> i8,
) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .quote_style(csv::QuoteStyle::Never)
        .from_path(path)?;
    let header: Vec<String> = std::iter::once("id".to_string())
        .chain((0..n_features).map(|k| format!("f{k}")))
        .chain((0..n_classes).map(|j| format!("y{j}")))
        .collect();
    w.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (i, id) in ids.iter().enumerate() {
        record.clear();
        record.push(id.to_string());
        record.extend(
            features[i * n_features..(i + 1) * n_features]
                .iter()
                .map(f64::to_string),
        );
        record.extend((0..n_classes).map(|j| label_of(i, j).to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_dataset_csv(ds: &Dataset, path: &Path) -> Result<()> {
    write_rows(
        path,
        &ds.ids,
        ds.n_features,
        &ds.features,
        ds.n_classes(),
        |i, j| ds.gt.get(i, j) as i8,
    )
}

/// Observation file: the dataset's ids and features with label columns
/// replaced by observation codes.
pub fn save_observations_csv(ds: &Dataset, obs: &ObservationMatrix, path: &Path) -> Result<()> {
    check_len("observation rows", ds.len(), obs.n_rows())?;
    check_len("observation classes", ds.n_classes(), obs.n_classes())?;
    write_rows(
        path,
        &ds.ids,
        ds.n_features,
        &ds.features,
        ds.n_classes(),
        |i, j| obs.get(i, j).code(),
    )
}

/// Raw contents of a dataset-format CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCsv {
    pub ids: Vec<u64>,
    pub n_features: usize,
    pub features: Vec<f64>,
    pub n_classes: usize,
    pub labels: Vec<i8>,
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_header(path: &Path, header: &csv::StringRecord) -> Result<(usize, usize)> {
    let mut fields = header.iter();
    if fields.next() != Some("id") {
        return Err(parse_err(path, 1, "header must start with `id`"));
    }
    let (mut d, mut l) = (0usize, 0usize);
    for name in fields {
        if l == 0 && name == format!("f{d}") {
            d += 1;
        } else if name == format!("y{l}") {
            l += 1;
        } else {
            return Err(parse_err(path, 1, format!("unexpected column `{name}`")));
        }
    }
    if l == 0 {
        return Err(parse_err(path, 1, "no label columns"));
    }
    Ok((d, l))
}

pub fn read_labeled_csv(path: &Path, allowed: &[i8]) -> Result<LabeledCsv> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(r) => r?,
        None => return Err(parse_err(path, 1, "empty file")),
    };
    let (d, l) = parse_header(path, &header)?;
    let width = 1 + d + l;
    let mut out = LabeledCsv {
        ids: Vec::new(),
        n_features: d,
        features: Vec::new(),
        n_classes: l,
        labels: Vec::new(),
    };
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != width {
            return Err(parse_err(
                path,
                line,
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        let id = rec[0]
            .parse::<u64>()
            .map_err(|_| parse_err(path, line, format!("bad id `{}`", &rec[0])))?;
        out.ids.push(id);
        for k in 0..d {
            let v = rec[1 + k]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("bad feature `{}`", &rec[1 + k])))?;
            out.features.push(v);
        }
        for j in 0..l {
            let raw = &rec[1 + d + j];
            let v = raw
                .parse::<i8>()
                .ok()
                .filter(|v| allowed.contains(v))
                .ok_or_else(|| {
                    parse_err(path, line, format!("label `{raw}` not in {allowed:?}"))
                })?;
            out.labels.push(v);
        }
    }
    Ok(out)
}

pub fn load_dataset_csv(path: &Path, split: Split) -> Result<Dataset> {
    let raw = read_labeled_csv(path, &[0, 1])?;
    let n = raw.ids.len();
    let gt = GroundTruthMatrix::new(
        n,
        raw.n_classes,
        raw.labels.iter().map(|&v| v == 1).collect(),
    )?;
    Dataset::new(raw.ids, raw.n_features, raw.features, gt, split)
}

/// Observation file with its row ids.
pub fn load_observations_csv(path: &Path) -> Result<(Vec<u64>, ObservationMatrix)> {
    let raw = read_labeled_csv(path, &[-1, 0, 1])?;
    let n = raw.ids.len();
    let obs = raw
        .labels
        .iter()
        .map(|&v| Observation::from_code(v as i64).expect("validated code"))
        .collect();
    Ok((raw.ids, ObservationMatrix::new(n, raw.n_classes, obs)?))
}

pub fn save_dataset_dir(generated: &Generated, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    save_dataset_csv(&generated.train, &dir.join(TRAIN_FILE))?;
    save_dataset_csv(&generated.test, &dir.join(TEST_FILE))?;
    fs::write(
        dir.join(TEACHER_FILE),
        serde_json::to_string_pretty(&generated.teacher)? + "\n",
    )?;
    Ok(())
}

pub struct DataDir {
    pub train: Dataset,
    pub test: Dataset,
}

pub fn load_dataset_dir(dir: &Path) -> Result<DataDir> {
    let path = |f: &str| -> PathBuf { dir.join(f) };
    let train = load_dataset_csv(&path(TRAIN_FILE), Split::Train)?;
    let test = load_dataset_csv(&path(TEST_FILE), Split::Test)?;
    if train.n_features != test.n_features || train.n_classes() != test.n_classes() {
        return Err(Error::Data(
            "train and test files disagree on dimensions".into(),
        ));
    }
    Ok(DataDir { train, test })
}
