//! End-to-end training of the classifier with pseudo labels.
//!
//! Per epoch `t` (with `φ = t / T`) every image is visited once in a
//! seed-determined shuffled order, in mini-batches. For each image:
//!
//! 1. forward pass → prediction `p`
//! 2. loss and `∂loss/∂p` against the current pseudo state
//! 3. pseudo-label recurrence (PLMCL only): momentum, latent, sigmoid
//! 4. backprop, accumulated over the batch
//!
//! and one SGD step per batch. Step 2 reads the pseudo labels as they were
//! before step 3, which is the order of the algorithm: the loss is built
//! before the regulated labels are refreshed.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::datagen::Dataset;
use crate::error::{check_len, Error, Result};
use crate::harness::config::TrainConfig;
use crate::labels::{ObservationMatrix, SeededRng};
use crate::losses::{self, EpochProgress, LossBreakdown, LossKind};
use crate::metrics::{mean_average_precision, EvalBatch, MapReport};
use crate::ndcore::MlpParams;
use crate::pseudo::{confidence, epoch_update, PseudoState};

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRow {
    /// Zero-based epoch index.
    pub epoch: usize,
    pub phi: f64,
    /// Mean per-image training loss.
    pub loss: LossBreakdown,
    pub train_map: f64,
    pub test_map: f64,
    pub test_per_class: Vec<Option<f64>>,
    /// Mean `|2ŷ − 1|` over unobserved entries.
    pub mean_confidence: f64,
    /// Fraction of unobserved entries where `ŷ > 0.5` matches the truth.
    pub agreement: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub rows: Vec<EpochRow>,
    pub best_epoch: usize,
    pub best_test_map: f64,
    pub final_test_map: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the best test mAP.
    pub best: MlpParams,
    pub last: MlpParams,
    pub states: Vec<PseudoState>,
    pub report: MetricsReport,
}

/// Called after every epoch with the live pseudo states.
pub type EpochObserver<'a> = dyn FnMut(usize, &[PseudoState]) -> Result<()> + 'a;

pub fn train(
    config: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    observations: &ObservationMatrix,
) -> Result<TrainOutcome> {
    train_with_observer(
        config,
        train_set,
        test_set,
        observations,
        &mut |_, _| Ok(()),
    )
}

pub fn train_with_observer(
    config: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    observations: &ObservationMatrix,
    observer: &mut EpochObserver<'_>,
) -> Result<TrainOutcome> {
    config.validate()?;
    check_len("observation rows", train_set.len(), observations.n_rows())?;
    check_len(
        "observation classes",
        train_set.n_classes(),
        observations.n_classes(),
    )?;
    check_len("test classes", train_set.n_classes(), test_set.n_classes())?;
    check_len("test features", train_set.n_features, test_set.n_features)?;
    if train_set.is_empty() {
        return Err(Error::Data("empty training set".into()));
    }

    let (d, l) = (train_set.n_features, train_set.n_classes());
    let epochs = config.total_epochs();
    let hyper = config.pseudo_hyper();
    let plmcl_cfg = config.plmcl_loss();
    let wan_gamma = config.wan_gamma_for(l);
    let head_epochs = config.two_phase.map_or(0, |tp| tp.head_epochs);

    let mut params = MlpParams::random(
        d,
        config.hidden_width,
        l,
        &mut SeededRng::derive(config.seed, INIT_STREAM),
    );
    let mut shuffle_rng = SeededRng::derive(config.seed, SHUFFLE_STREAM);
    let mut states: Vec<PseudoState> = (0..train_set.len())
        .map(|i| PseudoState::init(observations.row(i)))
        .collect();
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut rows = Vec::with_capacity(epochs);
    let mut best: Option<(usize, f64, MlpParams)> = None;

    for epoch in 0..epochs {
        let phi = EpochProgress::at_epoch(epoch, epochs).phi();
        let head_only = epoch < head_epochs;
        order.shuffle(&mut shuffle_rng);
        let mut epoch_loss = LossBreakdown::default();

        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            let mut grads = MlpParams::zeros(d, config.hidden_width, l);
            let mut batch_loss = LossBreakdown::default();
            for &i in batch {
                let obs_row = observations.row(i);
                let (pred, cache) = params.forward(train_set.row(i))?;
                let (loss, d_pred) = match config.loss {
                    LossKind::Plmcl => {
                        let state = &mut states[i];
                        let b = losses::loss_plmcl(&pred, state, obs_row, phi, &plmcl_cfg)?;
                        let g = losses::loss_plmcl_grad(&pred, state, obs_row, phi, &plmcl_cfg)?;
                        epoch_update(state, &pred, &hyper).map_err(|e| Error::NumericalAbort {
                            epoch,
                            batch: batch_idx,
                            what: e.to_string(),
                        })?;
                        (b, g)
                    }
                    LossKind::An => (
                        LossBreakdown::new(losses::loss_an(&pred, obs_row)?, 0.0, 0.0),
                        losses::loss_an_grad(&pred, obs_row)?,
                    ),
                    LossKind::AnLs => (
                        LossBreakdown::new(
                            losses::loss_an_ls(&pred, obs_row, config.ls_eps)?,
                            0.0,
                            0.0,
                        ),
                        losses::loss_an_ls_grad(&pred, obs_row, config.ls_eps)?,
                    ),
                    LossKind::Wan => (
                        LossBreakdown::new(losses::loss_wan(&pred, obs_row, wan_gamma)?, 0.0, 0.0),
                        losses::loss_wan_grad(&pred, obs_row, wan_gamma)?,
                    ),
                };
                batch_loss.accumulate(&loss);
                grads.add_scaled(&params.backward(&cache, &d_pred)?, 1.0)?;
            }

            if !batch_loss.is_finite() || !grads.is_finite() {
                return Err(Error::NumericalAbort {
                    epoch,
                    batch: batch_idx,
                    what: format!("non-finite loss {:?}", batch_loss),
                });
            }
            epoch_loss.accumulate(&batch_loss);
            let mut step = MlpParams::zeros(d, config.hidden_width, l);
            step.add_scaled(&grads, 1.0 / batch.len() as f64)?;
            if head_only {
                step.freeze_hidden();
            }
            params.sgd_step(&step, config.lr)?;
            if !params.is_finite() {
                return Err(Error::NumericalAbort {
                    epoch,
                    batch: batch_idx,
                    what: "parameters diverged".into(),
                });
            }
        }

        let train_eval = evaluate(&params, train_set)?;
        let test_eval = evaluate(&params, test_set)?;
        let (mean_confidence, agreement) = pseudo_quality(&states, train_set);
        if best.as_ref().is_none_or(|(_, m, _)| test_eval.map > *m) {
            best = Some((epoch, test_eval.map, params.clone()));
        }
        rows.push(EpochRow {
            epoch,
            phi,
            loss: epoch_loss.scaled(1.0 / train_set.len() as f64),
            train_map: train_eval.map,
            test_map: test_eval.map,
            test_per_class: test_eval.per_class,
            mean_confidence,
            agreement,
        });
        observer(epoch, &states)?;
    }

    let (best_epoch, best_test_map, best_params) = best.expect("at least one epoch");
    let final_test_map = rows.last().map_or(0.0, |r| r.test_map);
    Ok(TrainOutcome {
        best: best_params,
        last: params,
        states,
        report: MetricsReport {
            rows,
            best_epoch,
            best_test_map,
            final_test_map,
        },
    })
}

/// Mean confidence and truth agreement of pseudo labels on unobserved entries.
pub fn pseudo_quality(states: &[PseudoState], data: &Dataset) -> (f64, f64) {
    let (mut conf, mut agree, mut count) = (0.0, 0usize, 0usize);
    for (i, s) in states.iter().enumerate() {
        for j in s.unobserved() {
            conf += confidence(s.soft[j]);
            agree += usize::from((s.soft[j] > 0.5) == data.gt.get(i, j));
            count += 1;
        }
    }
    if count == 0 {
        (0.0, 0.0)
    } else {
        (conf / count as f64, agree as f64 / count as f64)
    }
}

/// mAP and per-class AP of `params` on `data`.
pub fn evaluate(params: &MlpParams, data: &Dataset) -> Result<MapReport> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    let mut scores = Vec::with_capacity(data.len() * data.n_classes());
    for i in 0..data.len() {
        scores.extend(params.predict(data.row(i))?);
    }
    let batch = EvalBatch::new(
        data.len(),
        data.n_classes(),
        scores,
        data.gt.as_slice().to_vec(),
    )?;
    mean_average_precision(&batch)
}
