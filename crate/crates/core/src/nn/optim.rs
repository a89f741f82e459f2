//! Adam with bias correction, and the L1 weight penalty.

use serde::{Deserialize, Serialize};

use super::params::{ParamKind, ParamStore};
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moments for one flat array.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AdamMoments<S> {
    pub m: Vec<S>,
    pub v: Vec<S>,
}

/// One Adam update of a flat array at (1-based) step `t`.
pub fn adam_step<S: Scalar>(
    params: &mut [S],
    grads: &[S],
    moments: &mut AdamMoments<S>,
    t: u64,
    cfg: &AdamConfig,
) -> Result<()> {
    check_len(params.len(), grads.len())?;
    if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!("gradient entry {i}")));
    }
    moments.m.resize(params.len(), S::zero());
    moments.v.resize(params.len(), S::zero());
    let (b1, b2) = (S::of(cfg.beta1), S::of(cfg.beta2));
    let lr = S::of(cfg.lr);
    let eps = S::of(cfg.eps);
    let bc1 = S::one() - b1.powi(t as i32);
    let bc2 = S::one() - b2.powi(t as i32);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(moments.m.iter_mut()).zip(moments.v.iter_mut()) {
        *m = b1 * *m + (S::one() - b1) * g;
        *v = b2 * *v + (S::one() - b2) * g * g;
        let m_hat = *m / bc1;
        let v_hat = *v / bc2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

/// Adam state for a whole [`ParamStore`]. Tolerates parameters that grew
/// since the last step (new kernel rows start with zero moments).
#[derive(Debug, Clone, Default)]
pub struct Adam<S> {
    pub config: AdamConfig,
    moments: Vec<AdamMoments<S>>,
    t: u64,
}

impl<S: Scalar> Adam<S> {
    pub fn new(config: AdamConfig) -> Self {
        Self { config, moments: Vec::new(), t: 0 }
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self, params: &mut ParamStore<S>, grads: &ParamStore<S>) -> Result<()> {
        params.check_same_layout(grads)?;
        if !grads.all_finite() {
            let bad = grads.iter().find(|p| p.data.iter().any(|x| !x.is_finite())).unwrap();
            return Err(Error::NonFinite(format!("gradient of {}", bad.name)));
        }
        self.moments.resize_with(params.num_params(), AdamMoments::default);
        self.t += 1;
        for ((p, g), mom) in params.iter_mut().zip(grads.iter()).zip(self.moments.iter_mut()) {
            adam_step(&mut p.data, &g.data, mom, self.t, &self.config)?;
        }
        Ok(())
    }
}

/// `λ Σ|w|` over a flat array, with subgradient `λ sign(w)` (0 at 0) added
/// into `grad`.
pub fn l1_penalty_and_grad_slice<S: Scalar>(weights: &[S], lambda: S, grad: &mut [S]) -> S {
    let mut penalty = S::zero();
    for (&w, g) in weights.iter().zip(grad.iter_mut()) {
        penalty += w.abs();
        if w > S::zero() {
            *g += lambda;
        } else if w < S::zero() {
            *g -= lambda;
        }
    }
    lambda * penalty
}

/// L1 over every weight matrix; biases and kernel tables are exempt.
pub fn l1_penalty_and_grad<S: Scalar>(params: &ParamStore<S>, lambda: f64, grads: &mut ParamStore<S>) -> Result<S> {
    if !(lambda >= 0.0) {
        return Err(Error::InvalidInput(format!("L1 weight must be non-negative, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(S::zero());
    }
    let lam = S::of(lambda);
    let mut total = S::zero();
    for (p, g) in params.iter().zip(grads.iter_mut()) {
        if p.kind == ParamKind::Weight {
            total += l1_penalty_and_grad_slice(&p.data, lam, &mut g.data);
        }
    }
    Ok(total)
}

pub fn l1_penalty<S: Scalar>(params: &ParamStore<S>, lambda: f64) -> S {
    let lam = S::of(lambda);
    params
        .iter()
        .filter(|p| p.kind == ParamKind::Weight)
        .map(|p| lam * p.data.iter().map(|w| w.abs()).sum::<S>())
        .sum()
}
