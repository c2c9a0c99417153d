//! The scheduled pseudo-label objective and the assume-negative baselines.
//!
//! Every loss here is per image and comes with its gradient with respect to
//! the predicted probabilities, which feeds [`MlpParams::backward`].
//!
//! [`MlpParams::backward`]: crate::ndcore::MlpParams::backward

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::labels::Observation;
use crate::ndcore::{bce, bce_grad_q};
use crate::pseudo::{confidence, PseudoState};

/// Sharpness of the confidence term inside the scheduler.
const XI_SHARPNESS: f64 = 10.0;

/// Training progress `φ = t / T`, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct EpochProgress(f64);

impl EpochProgress {
    pub fn new(phi: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&phi) {
            Ok(Self(phi))
        } else {
            Err(Error::InvalidArgument(format!(
                "phi must lie in [0, 1], got {phi}"
            )))
        }
    }

    /// Progress at the start of zero-based `epoch` out of `total`.
    pub fn at_epoch(epoch: usize, total: usize) -> Self {
        Self((epoch as f64 / total.max(1) as f64).min(1.0))
    }

    pub fn phi(self) -> f64 {
        self.0
    }
}

/// Per-label weight on the unobserved term:
/// `β2·(1 − γe)/(1 + γe)` with `γ = 1 − φ` and `e = exp(−10·|2s − 1|)`.
pub fn scheduler_xi(soft: f64, phi: f64, beta2: f64) -> f64 {
    let gamma = 1.0 - phi;
    let ge = gamma * (-XI_SHARPNESS * confidence(soft)).exp();
    beta2 * (1.0 - ge) / (1.0 + ge)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub obs_term: f64,
    pub unobs_term: f64,
    pub regularizer: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(obs_term: f64, unobs_term: f64, regularizer: f64) -> Self {
        Self {
            obs_term,
            unobs_term,
            regularizer,
            total: obs_term + unobs_term + regularizer,
        }
    }

    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.obs_term += other.obs_term;
        self.unobs_term += other.unobs_term;
        self.regularizer += other.regularizer;
        self.total += other.total;
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self {
            obs_term: self.obs_term * s,
            unobs_term: self.unobs_term * s,
            regularizer: self.regularizer * s,
            total: self.total * s,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.obs_term.is_finite()
            && self.unobs_term.is_finite()
            && self.regularizer.is_finite()
            && self.total.is_finite()
    }
}

/// Expected-positive penalty `w·((Σ_j p_j − k)/L)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regularizer {
    pub weight: f64,
    pub expected_positives: f64,
}

impl Default for Regularizer {
    fn default() -> Self {
        Self {
            weight: 0.1,
            expected_positives: 1.0,
        }
    }
}

impl Regularizer {
    pub fn value(&self, pred: &[f64]) -> f64 {
        if self.weight == 0.0 || pred.is_empty() {
            return 0.0;
        }
        let dev = self.deviation(pred);
        self.weight * dev * dev
    }

    /// Same value for every class: `2w·dev/L`.
    pub fn grad(&self, pred: &[f64]) -> f64 {
        if self.weight == 0.0 || pred.is_empty() {
            return 0.0;
        }
        2.0 * self.weight * self.deviation(pred) / pred.len() as f64
    }

    fn deviation(&self, pred: &[f64]) -> f64 {
        (pred.iter().sum::<f64>() - self.expected_positives) / pred.len() as f64
    }
}

/// Mean BCE over the observed entries only; 0 for a fully unobserved row.
pub fn observed_bce(pred: &[f64], obs_row: &[Observation]) -> Result<f64> {
    check_len("observed loss", obs_row.len(), pred.len())?;
    let (sum, count) =
        observed_terms(pred, obs_row).fold((0.0, 0usize), |(s, c), (t, q)| (s + bce(t, q), c + 1));
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

fn observed_terms<'a>(
    pred: &'a [f64],
    obs_row: &'a [Observation],
) -> impl Iterator<Item = (f64, f64)> + 'a {
    obs_row.iter().zip(pred).filter_map(|(o, &q)| match o {
        Observation::Positive => Some((1.0, q)),
        Observation::Negative => Some((0.0, q)),
        Observation::Unobserved => None,
    })
}

/// Observed-label loss: [`observed_bce`] plus the regularizer.
pub fn loss_obs(pred: &[f64], obs_row: &[Observation], reg: &Regularizer) -> Result<f64> {
    Ok(observed_bce(pred, obs_row)? + reg.value(pred))
}

pub fn loss_obs_grad(pred: &[f64], obs_row: &[Observation], reg: &Regularizer) -> Result<Vec<f64>> {
    check_len("observed loss", obs_row.len(), pred.len())?;
    let count = obs_row.iter().filter(|o| o.is_observed()).count();
    let r = reg.grad(pred);
    Ok(obs_row
        .iter()
        .zip(pred)
        .map(|(o, &q)| {
            let data = match o {
                Observation::Positive => bce_grad_q(1.0, q) / count as f64,
                Observation::Negative => bce_grad_q(0.0, q) / count as f64,
                Observation::Unobserved => 0.0,
            };
            data + r
        })
        .collect())
}

/// `Σ_{j unobserved} ξ(ŷ_j, φ)·L(ŷ_j, p_j)`; the soft pseudo labels are the
/// targets and are treated as constants.
pub fn loss_unobs(pred: &[f64], state: &PseudoState, phi: f64, beta2: f64) -> Result<f64> {
    check_len("unobserved loss", state.len(), pred.len())?;
    Ok(state
        .unobserved()
        .map(|j| {
            let s = state.soft[j];
            scheduler_xi(s, phi, beta2) * bce(s, pred[j])
        })
        .sum())
}

pub fn loss_unobs_grad(
    pred: &[f64],
    state: &PseudoState,
    phi: f64,
    beta2: f64,
) -> Result<Vec<f64>> {
    check_len("unobserved loss", state.len(), pred.len())?;
    let mut g = vec![0.0; pred.len()];
    for j in state.unobserved() {
        let s = state.soft[j];
        g[j] = scheduler_xi(s, phi, beta2) * bce_grad_q(s, pred[j]);
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlmclLossConfig {
    pub beta2: f64,
    pub reg: Regularizer,
}

impl Default for PlmclLossConfig {
    fn default() -> Self {
        Self {
            beta2: 0.6,
            reg: Regularizer::default(),
        }
    }
}

pub fn loss_plmcl(
    pred: &[f64],
    state: &PseudoState,
    obs_row: &[Observation],
    phi: f64,
    config: &PlmclLossConfig,
) -> Result<LossBreakdown> {
    Ok(LossBreakdown::new(
        observed_bce(pred, obs_row)?,
        loss_unobs(pred, state, phi, config.beta2)?,
        config.reg.value(pred),
    ))
}

pub fn loss_plmcl_grad(
    pred: &[f64],
    state: &PseudoState,
    obs_row: &[Observation],
    phi: f64,
    config: &PlmclLossConfig,
) -> Result<Vec<f64>> {
    let mut g = loss_obs_grad(pred, obs_row, &config.reg)?;
    for (a, b) in g
        .iter_mut()
        .zip(loss_unobs_grad(pred, state, phi, config.beta2)?)
    {
        *a += b;
    }
    Ok(g)
}

/// `(target, weight)` for one entry of an assume-negative style loss.
fn assumed_negative_target(o: Observation, smoothing: f64, unobserved_weight: f64) -> (f64, f64) {
    match o {
        Observation::Positive => (1.0 - smoothing, 1.0),
        Observation::Negative => (smoothing, 1.0),
        Observation::Unobserved => (smoothing, unobserved_weight),
    }
}

fn weighted_mean_bce(
    pred: &[f64],
    obs_row: &[Observation],
    smoothing: f64,
    unobserved_weight: f64,
) -> Result<f64> {
    check_len("baseline loss", obs_row.len(), pred.len())?;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let sum: f64 = obs_row
        .iter()
        .zip(pred)
        .map(|(&o, &q)| {
            let (t, w) = assumed_negative_target(o, smoothing, unobserved_weight);
            w * bce(t, q)
        })
        .sum();
    Ok(sum / pred.len() as f64)
}

fn weighted_mean_bce_grad(
    pred: &[f64],
    obs_row: &[Observation],
    smoothing: f64,
    unobserved_weight: f64,
) -> Result<Vec<f64>> {
    check_len("baseline loss", obs_row.len(), pred.len())?;
    let l = pred.len() as f64;
    Ok(obs_row
        .iter()
        .zip(pred)
        .map(|(&o, &q)| {
            let (t, w) = assumed_negative_target(o, smoothing, unobserved_weight);
            w * bce_grad_q(t, q) / l
        })
        .collect())
}

/// Assume negative: every unobserved label is a negative.
pub fn loss_an(pred: &[f64], obs_row: &[Observation]) -> Result<f64> {
    weighted_mean_bce(pred, obs_row, 0.0, 1.0)
}

/// Assume negative with label smoothing: targets `1 − ε` / `ε`.
pub fn loss_an_ls(pred: &[f64], obs_row: &[Observation], eps: f64) -> Result<f64> {
    weighted_mean_bce(pred, obs_row, eps, 1.0)
}

/// Weighted assume negative: assumed negatives scaled by `gamma_w`.
pub fn loss_wan(pred: &[f64], obs_row: &[Observation], gamma_w: f64) -> Result<f64> {
    weighted_mean_bce(pred, obs_row, 0.0, gamma_w)
}

pub fn loss_an_grad(pred: &[f64], obs_row: &[Observation]) -> Result<Vec<f64>> {
    weighted_mean_bce_grad(pred, obs_row, 0.0, 1.0)
}

pub fn loss_an_ls_grad(pred: &[f64], obs_row: &[Observation], eps: f64) -> Result<Vec<f64>> {
    weighted_mean_bce_grad(pred, obs_row, eps, 1.0)
}

pub fn loss_wan_grad(pred: &[f64], obs_row: &[Observation], gamma_w: f64) -> Result<Vec<f64>> {
    weighted_mean_bce_grad(pred, obs_row, 0.0, gamma_w)
}

/// Default down-weighting for WAN, `1/(L − 1)`.
pub fn default_wan_gamma(n_classes: usize) -> f64 {
    if n_classes > 1 {
        1.0 / (n_classes - 1) as f64
    } else {
        1.0
    }
}

pub const DEFAULT_LS_EPS: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    Plmcl,
    An,
    AnLs,
    Wan,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [LossKind::Plmcl, LossKind::An, LossKind::AnLs, LossKind::Wan];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::Plmcl => "plmcl",
            LossKind::An => "an",
            LossKind::AnLs => "an_ls",
            LossKind::Wan => "wan",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "plmcl" => Ok(LossKind::Plmcl),
            "an" => Ok(LossKind::An),
            "an_ls" => Ok(LossKind::AnLs),
            "wan" => Ok(LossKind::Wan),
            other => Err(Error::Config(format!("unknown loss `{other}`"))),
        }
    }
}
