//! Average precision and its class mean.
//!
//! Items are ranked by descending score; equal scores keep their original
//! index order. AP is the mean of precision@k over the ranks `k` that hold a
//! positive.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Scores and ground truth for `N` items over `L` classes, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalBatch {
    n_items: usize,
    n_classes: usize,
    scores: Vec<f64>,
    truth: Vec<bool>,
}

impl EvalBatch {
    pub fn new(
        n_items: usize,
        n_classes: usize,
        scores: Vec<f64>,
        truth: Vec<bool>,
    ) -> Result<Self> {
        check_len("eval scores", n_items * n_classes, scores.len())?;
        check_len("eval truth", n_items * n_classes, truth.len())?;
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("evaluation scores"));
        }
        Ok(Self {
            n_items,
            n_classes,
            scores,
            truth,
        })
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn class_scores(&self, j: usize) -> Vec<f64> {
        (0..self.n_items)
            .map(|i| self.scores[i * self.n_classes + j])
            .collect()
    }

    pub fn class_truth(&self, j: usize) -> Vec<bool> {
        (0..self.n_items)
            .map(|i| self.truth[i * self.n_classes + j])
            .collect()
    }
}

/// Ranking order: descending score, ties by ascending index.
pub fn rank_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// AP of one class. Errors when `truth` holds no positive.
pub fn average_precision(scores: &[f64], truth: &[bool]) -> Result<f64> {
    check_len("average precision", scores.len(), truth.len())?;
    let positives = truth.iter().filter(|&&t| t).count();
    if positives == 0 {
        return Err(Error::NoPositiveClasses);
    }
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in rank_order(scores).iter().enumerate() {
        if truth[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / positives as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    pub map: f64,
    /// `None` for classes without a positive, which are left out of the mean.
    pub per_class: Vec<Option<f64>>,
}

impl MapReport {
    pub fn skipped_classes(&self) -> Vec<usize> {
        self.per_class
            .iter()
            .enumerate()
            .filter_map(|(j, ap)| ap.is_none().then_some(j))
            .collect()
    }
}

/// Unweighted mean AP over classes with at least one positive.
pub fn mean_average_precision(batch: &EvalBatch) -> Result<MapReport> {
    let per_class: Vec<Option<f64>> = (0..batch.n_classes)
        .map(|j| {
            let truth = batch.class_truth(j);
            if truth.contains(&true) {
                average_precision(&batch.class_scores(j), &truth).map(Some)
            } else {
                Ok(None)
            }
        })
        .collect::<Result<_>>()?;
    let valid: Vec<f64> = per_class.iter().flatten().copied().collect();
    if valid.is_empty() {
        return Err(Error::NoPositiveClasses);
    }
    let map = valid.iter().sum::<f64>() / valid.len() as f64;
    Ok(MapReport { map, per_class })
}
