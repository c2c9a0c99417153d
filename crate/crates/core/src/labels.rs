//! Observation regimes derived from fully-labelled ground truth.
//!
//! | setting | labelled images | observed entries per labelled image |
//! |---------|-----------------|-------------------------------------|
//! | FFL     | all             | all                                 |
//! | FPL     | all             | a random subset, ⌈f·L⌉ entries      |
//! | FSPL    | all             | exactly one positive                |
//! | SFL     | ⌊f·N⌋ images    | all                                 |
//! | SSPL    | ⌊f·N⌋ images    | exactly one positive                |
//!
//! All sampling is uniform and driven by a caller-owned [`SeededRng`], so the
//! same ground truth, parameters and seed always give the same mask.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Slack for `⌊f·N⌋` / `⌈f·L⌉` so that e.g. `0.6 · 1000` counts as 600.
const COUNT_SLACK: f64 = 1e-9;

/// Portable seeded generator (ChaCha8). Identical seeds yield identical
/// streams on every platform.
#[derive(Debug, Clone)]
pub struct SeededRng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl SeededRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// An independent generator for a named sub-task of this seed.
    pub fn derive(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { seed, inner }
    }
}

impl RngCore for SeededRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Observation {
    Positive,
    Negative,
    Unobserved,
}

impl Observation {
    /// CSV encoding: 1 / 0 / -1.
    pub fn code(self) -> i8 {
        match self {
            Observation::Positive => 1,
            Observation::Negative => 0,
            Observation::Unobserved => -1,
        }
    }

    pub fn from_code(code: i64) -> Option<Self> {
        match code {
            1 => Some(Observation::Positive),
            0 => Some(Observation::Negative),
            -1 => Some(Observation::Unobserved),
            _ => None,
        }
    }

    pub fn is_observed(self) -> bool {
        self != Observation::Unobserved
    }

    fn from_truth(bit: bool) -> Self {
        if bit {
            Observation::Positive
        } else {
            Observation::Negative
        }
    }
}

/// Fully-labelled `N × L` binary matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruthMatrix {
    n_rows: usize,
    n_classes: usize,
    labels: Vec<bool>,
}

impl GroundTruthMatrix {
    pub fn new(n_rows: usize, n_classes: usize, labels: Vec<bool>) -> Result<Self> {
        check_len("ground truth", n_rows * n_classes, labels.len())?;
        Ok(Self {
            n_rows,
            n_classes,
            labels,
        })
    }

    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let l = rows.first().map_or(0, Vec::len);
        let mut labels = Vec::with_capacity(rows.len() * l);
        for row in rows {
            check_len("ground truth row", l, row.len())?;
            labels.extend_from_slice(row);
        }
        Self::new(rows.len(), l, labels)
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.labels[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.labels[i * self.n_classes + j]
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.labels
    }

    /// First row without any positive, if there is one.
    pub fn first_empty_row(&self) -> Option<usize> {
        (0..self.n_rows).find(|&i| !self.row(i).contains(&true))
    }
}

/// Per-image, per-class observation state, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservationMatrix {
    n_rows: usize,
    n_classes: usize,
    obs: Vec<Observation>,
}

impl ObservationMatrix {
    pub fn new(n_rows: usize, n_classes: usize, obs: Vec<Observation>) -> Result<Self> {
        check_len("observations", n_rows * n_classes, obs.len())?;
        Ok(Self {
            n_rows,
            n_classes,
            obs,
        })
    }

    pub fn unobserved(n_rows: usize, n_classes: usize) -> Self {
        Self {
            n_rows,
            n_classes,
            obs: vec![Observation::Unobserved; n_rows * n_classes],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[Observation] {
        &self.obs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    fn row_mut(&mut self, i: usize) -> &mut [Observation] {
        &mut self.obs[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn get(&self, i: usize, j: usize) -> Observation {
        self.obs[i * self.n_classes + j]
    }

    pub fn as_slice(&self) -> &[Observation] {
        &self.obs
    }

    /// Indices of rows with at least one observed entry.
    pub fn labeled_set(&self) -> Vec<usize> {
        (0..self.n_rows)
            .filter(|&i| self.row(i).iter().any(|o| o.is_observed()))
            .collect()
    }

    pub fn observed_count(&self) -> usize {
        self.obs.iter().filter(|o| o.is_observed()).count()
    }

    pub fn unobserved_count(&self) -> usize {
        self.obs.len() - self.observed_count()
    }

    /// Whether every observed entry agrees with `gt`.
    pub fn consistent_with(&self, gt: &GroundTruthMatrix) -> bool {
        self.n_rows == gt.n_rows()
            && self.n_classes == gt.n_classes()
            && self.obs.iter().zip(gt.as_slice()).all(|(o, &t)| match o {
                Observation::Positive => t,
                Observation::Negative => !t,
                Observation::Unobserved => true,
            })
    }
}

pub fn mask_ffl(gt: &GroundTruthMatrix) -> ObservationMatrix {
    ObservationMatrix {
        n_rows: gt.n_rows(),
        n_classes: gt.n_classes(),
        obs: gt
            .as_slice()
            .iter()
            .map(|&b| Observation::from_truth(b))
            .collect(),
    }
}

pub fn mask_fspl(gt: &GroundTruthMatrix, rng: &mut SeededRng) -> Result<ObservationMatrix> {
    let rows: Vec<usize> = (0..gt.n_rows()).collect();
    single_positive_rows(gt, &rows, rng)
}

pub fn mask_sspl(
    gt: &GroundTruthMatrix,
    labeled_fraction: f64,
    rng: &mut SeededRng,
) -> Result<ObservationMatrix> {
    let rows = sample_rows(gt.n_rows(), labeled_fraction, rng)?;
    single_positive_rows(gt, &rows, rng)
}

pub fn mask_fpl(
    gt: &GroundTruthMatrix,
    per_image_fraction: f64,
    rng: &mut SeededRng,
) -> Result<ObservationMatrix> {
    check_fraction(per_image_fraction)?;
    let l = gt.n_classes();
    let keep = ((per_image_fraction * l as f64 - COUNT_SLACK).ceil() as usize).clamp(1, l.max(1));
    if keep >= l {
        return Ok(mask_ffl(gt));
    }
    let mut out = ObservationMatrix::unobserved(gt.n_rows(), l);
    for i in 0..gt.n_rows() {
        let truth = gt.row(i);
        let row = out.row_mut(i);
        for j in index::sample(rng, l, keep) {
            row[j] = Observation::from_truth(truth[j]);
        }
    }
    Ok(out)
}

pub fn mask_sfl(
    gt: &GroundTruthMatrix,
    labeled_fraction: f64,
    rng: &mut SeededRng,
) -> Result<ObservationMatrix> {
    let rows = sample_rows(gt.n_rows(), labeled_fraction, rng)?;
    let mut out = ObservationMatrix::unobserved(gt.n_rows(), gt.n_classes());
    for i in rows {
        for (o, &t) in out.row_mut(i).iter_mut().zip(gt.row(i)) {
            *o = Observation::from_truth(t);
        }
    }
    Ok(out)
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "fraction must lie in (0, 1], got {f}"
        )))
    }
}

/// `⌊f·N⌋` row indices, sorted ascending. The full set is returned without
/// consuming randomness so that `f = 1` reduces exactly to the full-set masks.
fn sample_rows(n: usize, fraction: f64, rng: &mut SeededRng) -> Result<Vec<usize>> {
    check_fraction(fraction)?;
    let count = ((fraction * n as f64 + COUNT_SLACK).floor() as usize).min(n);
    if count == n {
        return Ok((0..n).collect());
    }
    let mut rows = index::sample(rng, n, count).into_vec();
    rows.sort_unstable();
    Ok(rows)
}

fn single_positive_rows(
    gt: &GroundTruthMatrix,
    rows: &[usize],
    rng: &mut SeededRng,
) -> Result<ObservationMatrix> {
    let mut out = ObservationMatrix::unobserved(gt.n_rows(), gt.n_classes());
    for &i in rows {
        let positives: Vec<usize> = gt
            .row(i)
            .iter()
            .enumerate()
            .filter_map(|(j, &b)| b.then_some(j))
            .collect();
        let pick = match positives.len() {
            0 => return Err(Error::NoPositive { row: i }),
            1 => positives[0],
            k => positives[rng.random_range(0..k)],
        };
        out.row_mut(i)[pick] = Observation::Positive;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SettingKind {
    Ffl,
    Fpl,
    Fspl,
    Sspl,
    Sfl,
}

impl SettingKind {
    pub fn name(self) -> &'static str {
        match self {
            SettingKind::Ffl => "ffl",
            SettingKind::Fpl => "fpl",
            SettingKind::Fspl => "fspl",
            SettingKind::Sspl => "sspl",
            SettingKind::Sfl => "sfl",
        }
    }

    pub fn takes_fraction(self) -> bool {
        matches!(
            self,
            SettingKind::Fpl | SettingKind::Sspl | SettingKind::Sfl
        )
    }
}

impl fmt::Display for SettingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SettingKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ffl" => Ok(SettingKind::Ffl),
            "fpl" => Ok(SettingKind::Fpl),
            "fspl" => Ok(SettingKind::Fspl),
            "sspl" => Ok(SettingKind::Sspl),
            "sfl" => Ok(SettingKind::Sfl),
            other => Err(Error::Config(format!("unknown label setting `{other}`"))),
        }
    }
}

/// A label setting together with its fraction (ignored by FFL/FSPL).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelSetting {
    pub kind: SettingKind,
    pub fraction: f64,
}

impl LabelSetting {
    pub fn new(kind: SettingKind, fraction: f64) -> Self {
        Self { kind, fraction }
    }

    /// Fraction that actually shapes the mask; full-set settings report 1.
    pub fn effective_fraction(&self) -> f64 {
        if self.kind.takes_fraction() {
            self.fraction
        } else {
            1.0
        }
    }

    pub fn apply(&self, gt: &GroundTruthMatrix, rng: &mut SeededRng) -> Result<ObservationMatrix> {
        match self.kind {
            SettingKind::Ffl => Ok(mask_ffl(gt)),
            SettingKind::Fspl => mask_fspl(gt, rng),
            SettingKind::Fpl => mask_fpl(gt, self.fraction, rng),
            SettingKind::Sspl => mask_sspl(gt, self.fraction, rng),
            SettingKind::Sfl => mask_sfl(gt, self.fraction, rng),
        }
    }
}

impl fmt::Display for LabelSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.kind.takes_fraction() {
            write!(f, "{}:{}", self.kind, self.fraction)
        } else {
            write!(f, "{}", self.kind)
        }
    }
}

impl FromStr for LabelSetting {
    type Err = Error;

    /// `sspl:0.2`, `fspl`, ...
    fn from_str(s: &str) -> Result<Self> {
        let (kind, fraction) = match s.split_once(':') {
            Some((k, f)) => {
                let f: f64 = f
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad fraction in `{s}`")))?;
                (k.parse::<SettingKind>()?, f)
            }
            None => (s.parse::<SettingKind>()?, 1.0),
        };
        if kind.takes_fraction() {
            check_fraction(fraction).map_err(|e| Error::Config(e.to_string()))?;
        }
        Ok(Self { kind, fraction })
    }
}
