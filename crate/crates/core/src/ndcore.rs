//! Dense numerics and the small classifier `f(x, θ)`.
//!
//! The classifier is a one-hidden-layer perceptron with a `tanh` hidden
//! layer and an element-wise sigmoid output, so every class gets an
//! independent probability. A hidden width of zero degenerates to a linear
//! classifier `sigmoid(W x + b)`.
//!
//! Weights are stored row-major with shape `(out_dim, in_dim)`.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Lower/upper clamp applied to probabilities before any logarithm.
pub const PROB_EPS: f64 = 1e-7;

/// Logistic function, evaluated on the branch that never overflows.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn clamp_prob(q: f64) -> f64 {
    q.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Binary cross-entropy `-p ln q - (1-p) ln(1-q)` of target `p` against
/// probability `q`. `q` is clamped to `[ε, 1-ε]`.
pub fn bce(p: f64, q: f64) -> f64 {
    let q = clamp_prob(q);
    -p * q.ln() - (1.0 - p) * (1.0 - q).ln()
}

/// Derivative of [`bce`] with respect to `q`.
///
/// The clamp is treated as straight-through: the derivative is evaluated at
/// the clamped point, so saturated predictions still receive a gradient.
pub fn bce_grad_q(p: f64, q: f64) -> f64 {
    let q = clamp_prob(q);
    (q - p) / (q * (1.0 - q))
}

/// Classifier parameters. `hidden_width == 0` selects the linear model, in
/// which case `w1`/`b1` are empty and `w2` is `n_classes × input_dim`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub input_dim: usize,
    pub hidden_width: usize,
    pub n_classes: usize,
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of one forward pass, consumed by [`MlpParams::backward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardCache {
    pub input: Vec<f64>,
    pub hidden_pre: Vec<f64>,
    pub hidden: Vec<f64>,
    pub logits: Vec<f64>,
    pub probs: Vec<f64>,
}

impl MlpParams {
    pub fn zeros(input_dim: usize, hidden_width: usize, n_classes: usize) -> Self {
        let head_in = if hidden_width == 0 {
            input_dim
        } else {
            hidden_width
        };
        Self {
            input_dim,
            hidden_width,
            n_classes,
            w1: vec![0.0; hidden_width * input_dim],
            b1: vec![0.0; hidden_width],
            w2: vec![0.0; n_classes * head_in],
            b2: vec![0.0; n_classes],
        }
    }

    /// Weights drawn from `N(0, 1/fan_in)`, biases zero.
    pub fn random<R: Rng + ?Sized>(
        input_dim: usize,
        hidden_width: usize,
        n_classes: usize,
        rng: &mut R,
    ) -> Self {
        let mut p = Self::zeros(input_dim, hidden_width, n_classes);
        let s1 = 1.0 / (input_dim.max(1) as f64).sqrt();
        for w in &mut p.w1 {
            let z: f64 = StandardNormal.sample(rng);
            *w = z * s1;
        }
        let s2 = 1.0 / (p.head_in().max(1) as f64).sqrt();
        for w in &mut p.w2 {
            let z: f64 = StandardNormal.sample(rng);
            *w = z * s2;
        }
        p
    }

    /// Width of the vector the output layer reads.
    pub fn head_in(&self) -> usize {
        if self.hidden_width == 0 {
            self.input_dim
        } else {
            self.hidden_width
        }
    }

    pub fn is_linear(&self) -> bool {
        self.hidden_width == 0
    }

    pub fn validate(&self) -> Result<()> {
        check_len("w1", self.hidden_width * self.input_dim, self.w1.len())?;
        check_len("b1", self.hidden_width, self.b1.len())?;
        check_len("w2", self.n_classes * self.head_in(), self.w2.len())?;
        check_len("b2", self.n_classes, self.b2.len())?;
        if !self.is_finite() {
            return Err(Error::NonFinite("classifier parameters"));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn tensors(&self) -> [&[f64]; 4] {
        [&self.w1, &self.b1, &self.w2, &self.b2]
    }

    pub fn tensors_mut(&mut self) -> [&mut Vec<f64>; 4] {
        [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2]
    }

    pub fn forward(&self, x: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        check_len("forward input", self.input_dim, x.len())?;
        let (hidden_pre, hidden) = if self.is_linear() {
            (Vec::new(), Vec::new())
        } else {
            let pre = affine(&self.w1, &self.b1, x);
            let act = pre.iter().map(|v| v.tanh()).collect();
            (pre, act)
        };
        let head_input = if self.is_linear() { x } else { &hidden[..] };
        let logits = affine(&self.w2, &self.b2, head_input);
        let probs: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let cache = ForwardCache {
            input: x.to_vec(),
            hidden_pre,
            hidden,
            logits,
            probs: probs.clone(),
        };
        Ok((probs, cache))
    }

    /// Probabilities only, without building a cache.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("predict input", self.input_dim, x.len())?;
        let logits = if self.is_linear() {
            affine(&self.w2, &self.b2, x)
        } else {
            let hidden: Vec<f64> = affine(&self.w1, &self.b1, x)
                .into_iter()
                .map(f64::tanh)
                .collect();
            affine(&self.w2, &self.b2, &hidden)
        };
        Ok(logits.into_iter().map(sigmoid).collect())
    }

    /// Gradients of a loss with respect to every parameter, given the
    /// loss gradient with respect to the output probabilities.
    pub fn backward(&self, cache: &ForwardCache, d_probs: &[f64]) -> Result<MlpParams> {
        check_len("backward dLoss/dProbs", self.n_classes, d_probs.len())?;
        check_len("backward cache", self.n_classes, cache.probs.len())?;
        let d_logits: Vec<f64> = d_probs
            .iter()
            .zip(&cache.probs)
            .map(|(g, p)| g * p * (1.0 - p))
            .collect();
        self.backward_logits(cache, &d_logits)
    }

    /// Same as [`backward`](Self::backward) but starting from `dLoss/dLogits`.
    pub fn backward_logits(&self, cache: &ForwardCache, d_logits: &[f64]) -> Result<MlpParams> {
        check_len("backward dLoss/dLogits", self.n_classes, d_logits.len())?;
        check_len("backward cache input", self.input_dim, cache.input.len())?;
        let mut grads = MlpParams::zeros(self.input_dim, self.hidden_width, self.n_classes);
        let head_in = self.head_in();
        let a: &[f64] = if self.is_linear() {
            &cache.input
        } else {
            check_len(
                "backward cache hidden",
                self.hidden_width,
                cache.hidden.len(),
            )?;
            &cache.hidden
        };

        for (j, &dz) in d_logits.iter().enumerate() {
            grads.b2[j] = dz;
            let row = &mut grads.w2[j * head_in..(j + 1) * head_in];
            for (g, &ak) in row.iter_mut().zip(a) {
                *g = dz * ak;
            }
        }

        if !self.is_linear() {
            let d = self.input_dim;
            for k in 0..self.hidden_width {
                let dh: f64 = d_logits
                    .iter()
                    .enumerate()
                    .map(|(j, &dz)| self.w2[j * head_in + k] * dz)
                    .sum();
                let t = cache.hidden[k];
                let dpre = dh * (1.0 - t * t);
                grads.b1[k] = dpre;
                let row = &mut grads.w1[k * d..(k + 1) * d];
                for (g, &xi) in row.iter_mut().zip(&cache.input) {
                    *g = dpre * xi;
                }
            }
        }
        Ok(grads)
    }

    /// `self += scale * other`, element-wise.
    pub fn add_scaled(&mut self, other: &MlpParams, scale: f64) -> Result<()> {
        self.check_same_shape(other)?;
        for (dst, src) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (a, b) in dst.iter_mut().zip(src) {
                *a += scale * b;
            }
        }
        Ok(())
    }

    /// Plain SGD step `θ ← θ − lr·g`. Leaves `self` untouched on error.
    pub fn sgd_step(&mut self, grads: &MlpParams, lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning rate must be positive, got {lr}"
            )));
        }
        self.check_same_shape(grads)?;
        if !grads.is_finite() {
            return Err(Error::NonFinite("gradients"));
        }
        self.add_scaled(grads, -lr)
    }

    /// Zero the hidden-layer gradients so that only the output layer moves.
    pub fn freeze_hidden(&mut self) {
        self.w1.iter_mut().for_each(|v| *v = 0.0);
        self.b1.iter_mut().for_each(|v| *v = 0.0);
    }

    fn check_same_shape(&self, other: &MlpParams) -> Result<()> {
        check_len("input_dim", self.input_dim, other.input_dim)?;
        check_len("hidden_width", self.hidden_width, other.hidden_width)?;
        check_len("n_classes", self.n_classes, other.n_classes)?;
        for (a, b) in self.tensors().iter().zip(other.tensors()) {
            check_len("parameter tensor", a.len(), b.len())?;
        }
        Ok(())
    }
}

fn affine(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let n_in = x.len();
    b.iter()
        .enumerate()
        .map(|(r, &bias)| {
            let row = &w[r * n_in..(r + 1) * n_in];
            bias + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
        })
        .collect()
}
