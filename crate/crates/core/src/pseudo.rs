//! Per-image soft pseudo labels and their momentum curriculum update.
//!
//! Each image carries an unconstrained latent vector `y`, its sigmoid (the
//! soft pseudo label `ŷ`) and a momentum vector `m`. Once per epoch, given
//! the classifier prediction `p` for that image:
//!
//! ```text
//! g = ∇_y (1/L) Σ_j L(p_j, σ(y_j)) = (ŷ − p) / L
//! m ← β1·m + (1 − β1)·g
//! y ← y − ψ(ŷ) ∘ m,      ψ(s) = α·exp(−λ·|2s − 1|^n)
//! ŷ ← σ(y)
//! ```
//!
//! Observed entries are pinned: their soft value is the observed 0/1, their
//! momentum stays zero and no update ever touches them.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::labels::Observation;
use crate::ndcore::sigmoid;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PseudoHyper {
    /// Moving-average decay of the momentum, in `[0, 1)`.
    pub beta1: f64,
    /// Curriculum learning rate, the maximum of `ψ`.
    pub alpha: f64,
    pub lambda: f64,
    /// Exponent on the confidence inside `ψ`.
    pub n: u32,
}

impl Default for PseudoHyper {
    fn default() -> Self {
        Self {
            beta1: 0.7,
            alpha: 1.0,
            lambda: 4.0,
            n: 2,
        }
    }
}

impl PseudoHyper {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::InvalidArgument(format!(
                "beta1 must lie in [0, 1), got {}",
                self.beta1
            )));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be at least 1".into()));
        }
        Ok(())
    }
}

/// Confidence `|2s − 1|` of a soft label.
#[inline]
pub fn confidence(s: f64) -> f64 {
    (2.0 * s - 1.0).abs()
}

/// Pseudo-label state of a single image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoState {
    /// `y_u`; meaningless (kept at 0) on observed entries.
    pub latent: Vec<f64>,
    pub soft: Vec<f64>,
    pub momentum: Vec<f64>,
    pub observed_mask: Vec<bool>,
    pub observed_values: Vec<bool>,
}

impl PseudoState {
    /// Unobserved entries start at `ŷ = 0.5`, `y = 0`, `m = 0`; observed
    /// entries are pinned to their value.
    pub fn init(obs_row: &[Observation]) -> Self {
        let l = obs_row.len();
        let mut s = Self {
            latent: vec![0.0; l],
            soft: vec![0.5; l],
            momentum: vec![0.0; l],
            observed_mask: vec![false; l],
            observed_values: vec![false; l],
        };
        for (j, o) in obs_row.iter().enumerate() {
            match o {
                Observation::Positive => s.pin(j, true),
                Observation::Negative => s.pin(j, false),
                Observation::Unobserved => {}
            }
        }
        s
    }

    fn pin(&mut self, j: usize, value: bool) {
        self.observed_mask[j] = true;
        self.observed_values[j] = value;
        self.soft[j] = if value { 1.0 } else { 0.0 };
    }

    pub fn len(&self) -> usize {
        self.soft.len()
    }

    pub fn is_empty(&self) -> bool {
        self.soft.is_empty()
    }

    pub fn is_observed(&self, j: usize) -> bool {
        self.observed_mask[j]
    }

    pub fn unobserved(&self) -> impl Iterator<Item = usize> + '_ {
        self.observed_mask
            .iter()
            .enumerate()
            .filter_map(|(j, &o)| (!o).then_some(j))
    }

    /// Number of scalars held by this state.
    pub fn scalar_count(&self) -> usize {
        self.latent.len()
            + self.soft.len()
            + self.momentum.len()
            + self.observed_mask.len()
            + self.observed_values.len()
    }

    pub fn is_finite(&self) -> bool {
        self.latent
            .iter()
            .chain(&self.soft)
            .chain(&self.momentum)
            .all(|v| v.is_finite())
    }
}

/// `∇_y L_cs` where `L_cs = (1/L) Σ_j L(pred_j, σ(y_j))`; zero on observed
/// entries.
pub fn grad_lcs(pred: &[f64], state: &PseudoState) -> Result<Vec<f64>> {
    check_len("grad_lcs prediction", state.len(), pred.len())?;
    let l = state.len() as f64;
    Ok(pred
        .iter()
        .enumerate()
        .map(|(j, &p)| {
            if state.observed_mask[j] {
                0.0
            } else {
                (state.soft[j] - p) / l
            }
        })
        .collect())
}

/// `m ← β1·m + (1 − β1)·grad` on unobserved entries.
pub fn momentum_step(state: &mut PseudoState, grad: &[f64], beta1: f64) -> Result<()> {
    check_len("momentum gradient", state.len(), grad.len())?;
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite("pseudo-label gradient"));
    }
    for (j, &g) in grad.iter().enumerate() {
        if !state.observed_mask[j] {
            state.momentum[j] = beta1 * state.momentum[j] + (1.0 - beta1) * g;
        }
    }
    Ok(())
}

/// `ψ(s) = α·exp(−λ·|2s − 1|^n)`, element-wise.
pub fn self_guided_factor(soft: &[f64], hyper: &PseudoHyper) -> Vec<f64> {
    soft.iter().map(|&s| psi(s, hyper)).collect()
}

#[inline]
pub fn psi(s: f64, hyper: &PseudoHyper) -> f64 {
    hyper.alpha * (-hyper.lambda * confidence(s).powi(hyper.n as i32)).exp()
}

/// `y ← y − ψ(ŷ_prev) ∘ m`, then `ŷ ← σ(y)`, on unobserved entries only.
pub fn latent_update(state: &mut PseudoState, hyper: &PseudoHyper) -> Result<()> {
    for j in 0..state.len() {
        if state.observed_mask[j] {
            continue;
        }
        let y = state.latent[j] - psi(state.soft[j], hyper) * state.momentum[j];
        if !y.is_finite() {
            return Err(Error::NonFinite("pseudo-label latent"));
        }
        state.latent[j] = y;
        state.soft[j] = sigmoid(y);
    }
    Ok(())
}

/// One epoch of the pseudo-label recurrence for one image.
pub fn epoch_update(state: &mut PseudoState, pred: &[f64], hyper: &PseudoHyper) -> Result<()> {
    let grad = grad_lcs(pred, state)?;
    momentum_step(state, &grad, hyper.beta1)?;
    latent_update(state, hyper)
}
