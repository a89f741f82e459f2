//! Dense layers, activations and the soft-target cross-entropy criterion.

use rand::Rng;

use super::params::{ParamId, ParamKind, ParamStore};
use crate::error::{check_len, Error, Result};
use crate::scalar::Scalar;

/// Probabilities are clamped to this before taking logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

/// `out = W x + b` with `W` stored row-major as (out × in).
pub fn dense_forward<S: Scalar>(weight: &[S], bias: &[S], x: &[S], out: &mut [S]) -> Result<()> {
    let (n_out, n_in) = (bias.len(), x.len());
    check_len(n_out * n_in, weight.len())?;
    check_len(n_out, out.len())?;
    for (o, (row, &b)) in out.iter_mut().zip(weight.chunks_exact(n_in).zip(bias)) {
        let mut acc = b;
        for (&w, &xi) in row.iter().zip(x) {
            acc += w * xi;
        }
        *o = acc;
    }
    Ok(())
}

/// Accumulates `dW += dout xᵀ`, `db += dout`, and writes `dx = Wᵀ dout` when
/// requested.
pub fn dense_backward<S: Scalar>(
    weight: &[S],
    x: &[S],
    dout: &[S],
    dweight: &mut [S],
    dbias: &mut [S],
    dx: Option<&mut [S]>,
) -> Result<()> {
    let (n_out, n_in) = (dout.len(), x.len());
    check_len(n_out * n_in, weight.len())?;
    check_len(weight.len(), dweight.len())?;
    check_len(n_out, dbias.len())?;
    for ((drow, db), &g) in dweight.chunks_exact_mut(n_in).zip(dbias.iter_mut()).zip(dout) {
        *db += g;
        if g != S::zero() {
            for (dw, &xi) in drow.iter_mut().zip(x) {
                *dw += g * xi;
            }
        }
    }
    if let Some(dx) = dx {
        check_len(n_in, dx.len())?;
        dx.iter_mut().for_each(|v| *v = S::zero());
        for (row, &g) in weight.chunks_exact(n_in).zip(dout) {
            if g != S::zero() {
                for (d, &w) in dx.iter_mut().zip(row) {
                    *d += g * w;
                }
            }
        }
    }
    Ok(())
}

pub fn relu_forward<S: Scalar>(x: &mut [S]) {
    for v in x {
        if *v < S::zero() {
            *v = S::zero();
        }
    }
}

/// Zeroes `grad` where the forward activation was clipped.
pub fn relu_backward<S: Scalar>(activated: &[S], grad: &mut [S]) {
    for (g, &a) in grad.iter_mut().zip(activated) {
        if a <= S::zero() {
            *g = S::zero();
        }
    }
}

pub fn softmax_forward<S: Scalar>(logits: &[S]) -> Vec<S> {
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let exps: Vec<S> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: S = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn check_target<S: Scalar>(target: &[S]) -> Result<()> {
    let mut total = 0.0;
    for &t in target {
        if !(t >= S::zero() && t <= S::one()) {
            return Err(Error::NotADistribution(format!("target entry {t}")));
        }
        total += t.as_f64();
    }
    if (total - 1.0).abs() > crate::distribution::sum_tolerance::<S>() {
        return Err(Error::NotADistribution(format!("target sums to {total}")));
    }
    Ok(())
}

/// Soft-target cross-entropy `-Σ t log softmax(z)` and its gradient
/// `softmax(z) - t` with respect to the logits.
pub fn softce_loss_and_grad<S: Scalar>(logits: &[S], target: &[S]) -> Result<(S, Vec<S>)> {
    check_len(logits.len(), target.len())?;
    check_target(target)?;
    let max = logits.iter().copied().fold(S::neg_infinity(), S::max);
    let log_z = max + logits.iter().map(|&z| (z - max).exp()).sum::<S>().ln();
    let mut loss = S::zero();
    let mut grad = Vec::with_capacity(logits.len());
    for (&z, &t) in logits.iter().zip(target) {
        let log_p = z - log_z;
        if t > S::zero() {
            loss -= t * log_p;
        }
        grad.push(log_p.exp() - t);
    }
    Ok((loss, grad))
}

/// Cross-entropy between a target distribution and predicted probabilities,
/// with the prediction clamped away from zero.
pub fn soft_cross_entropy<S: Scalar>(pred: &[S], target: &[S]) -> S {
    let clamp = S::of(LOG_CLAMP);
    pred.iter()
        .zip(target)
        .filter(|(_, &t)| t > S::zero())
        .map(|(&p, &t)| -t * p.max(clamp).ln())
        .sum()
}

/// Handle to a dense layer whose weights live in a [`ParamStore`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DenseLayer {
    pub weight: ParamId,
    pub bias: ParamId,
    pub in_dim: usize,
    pub out_dim: usize,
}

#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// U(-√(6/in), √(6/in)), suited to ReLU inputs.
    HeUniform,
    /// U(-√(6/(in+out)), √(6/(in+out))).
    XavierUniform,
    Zeros,
}

impl DenseLayer {
    pub fn new<S: Scalar, R: Rng>(
        store: &mut ParamStore<S>,
        name: &str,
        in_dim: usize,
        out_dim: usize,
        init: Init,
        rng: &mut R,
    ) -> Self {
        let bound = match init {
            Init::HeUniform => (6.0 / in_dim as f64).sqrt(),
            Init::XavierUniform => (6.0 / (in_dim + out_dim) as f64).sqrt(),
            Init::Zeros => 0.0,
        };
        let w: Vec<S> = (0..in_dim * out_dim)
            .map(|_| if bound > 0.0 { S::of(rng.random_range(-bound..bound)) } else { S::zero() })
            .collect();
        let weight = store.add(format!("{name}.weight"), vec![out_dim, in_dim], ParamKind::Weight, w);
        let bias = store.add(format!("{name}.bias"), vec![out_dim], ParamKind::Bias, vec![S::zero(); out_dim]);
        Self { weight, bias, in_dim, out_dim }
    }

    pub fn forward<S: Scalar>(&self, store: &ParamStore<S>, x: &[S]) -> Result<Vec<S>> {
        let mut out = vec![S::zero(); self.out_dim];
        dense_forward(store.data(self.weight), store.data(self.bias), x, &mut out)?;
        Ok(out)
    }

    /// Accumulates parameter gradients into `grads` and returns `dx` if asked.
    pub fn backward<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        grads: &mut ParamStore<S>,
        x: &[S],
        dout: &[S],
        want_dx: bool,
    ) -> Result<Option<Vec<S>>> {
        let mut dx = want_dx.then(|| vec![S::zero(); self.in_dim]);
        let (dw, db) = grads.pair_mut(self.weight, self.bias);
        dense_backward(store.data(self.weight), x, dout, dw, db, dx.as_deref_mut())?;
        Ok(dx)
    }
}

/// A stack of dense layers with ReLU between them (and optionally after the
/// last one).
#[derive(Debug, Clone)]
pub struct Mlp {
    pub layers: Vec<DenseLayer>,
    pub relu_last: bool,
}

/// Activations recorded during a forward pass: `acts[0]` is the input and
/// `acts[i + 1]` the (post-activation) output of layer `i`.
#[derive(Debug, Clone)]
pub struct MlpCache<S> {
    pub acts: Vec<Vec<S>>,
}

impl<S> MlpCache<S> {
    pub fn output(&self) -> &[S] {
        self.acts.last().expect("cache holds the input at least")
    }
}

impl Mlp {
    pub fn forward<S: Scalar>(&self, store: &ParamStore<S>, x: &[S]) -> Result<MlpCache<S>> {
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(x.to_vec());
        for (i, layer) in self.layers.iter().enumerate() {
            let mut out = layer.forward(store, acts.last().unwrap())?;
            if i + 1 < self.layers.len() || self.relu_last {
                relu_forward(&mut out);
            }
            acts.push(out);
        }
        Ok(MlpCache { acts })
    }

    /// Backpropagates `dout` (gradient w.r.t. the cached output) and returns
    /// the gradient w.r.t. the input.
    pub fn backward<S: Scalar>(
        &self,
        store: &ParamStore<S>,
        grads: &mut ParamStore<S>,
        cache: &MlpCache<S>,
        dout: &[S],
        want_dx: bool,
    ) -> Result<Option<Vec<S>>> {
        let mut g = dout.to_vec();
        let n = self.layers.len();
        for i in (0..n).rev() {
            if i + 1 < n || self.relu_last {
                relu_backward(&cache.acts[i + 1], &mut g);
            }
            let need = want_dx || i > 0;
            match self.layers[i].backward(store, grads, &cache.acts[i], &g, need)? {
                Some(dx) => g = dx,
                None => return Ok(None),
            }
        }
        Ok(Some(g))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn softce_stationary_when_target_matches() {
        let z = [0.3_f64, -1.2, 2.0, 0.0, 0.7];
        let p = softmax_forward(&z);
        let (_, g) = softce_loss_and_grad(&z, &p).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn softce_uniform_is_ln5() {
        let (loss, _) = softce_loss_and_grad(&[0.0_f64; 5], &[0.2; 5]).unwrap();
        assert!((loss - 5f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn softce_errors() {
        assert!(softce_loss_and_grad(&[0.0_f64; 5], &[0.2; 4]).is_err());
        assert!(softce_loss_and_grad(&[0.0_f64; 2], &[0.7, 0.7]).is_err());
        assert!(softce_loss_and_grad(&[0.0_f64; 2], &[-0.5, 1.5]).is_err());
    }

    #[test]
    fn dense_shapes_checked() {
        let mut out = [0.0_f64; 2];
        assert!(dense_forward(&[1.0; 5], &[0.0; 2], &[1.0; 3], &mut out).is_err());
        dense_forward(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.5, -0.5], &[1.0, 0.0, -1.0], &mut out).unwrap();
        assert_eq!(out, [1.0 - 3.0 + 0.5, 4.0 - 6.0 - 0.5]);
    }

    #[test]
    fn dense_backward_matches_hand_computation() {
        let w = [1.0_f64, 2.0, 3.0, 4.0];
        let x = [0.5, -1.0];
        let dout = [1.0, 2.0];
        let mut dw = [0.0; 4];
        let mut db = [0.0; 2];
        let mut dx = [0.0; 2];
        dense_backward(&w, &x, &dout, &mut dw, &mut db, Some(&mut dx)).unwrap();
        assert_eq!(dw, [0.5, -1.0, 1.0, -2.0]);
        assert_eq!(db, [1.0, 2.0]);
        assert_eq!(dx, [1.0 + 6.0, 2.0 + 8.0]);
    }

    #[test]
    fn relu_pair() {
        let mut x = [-1.0_f64, 0.0, 2.0];
        relu_forward(&mut x);
        assert_eq!(x, [0.0, 0.0, 2.0]);
        let mut g = [1.0, 1.0, 1.0];
        relu_backward(&x, &mut g);
        assert_eq!(g, [0.0, 0.0, 1.0]);
    }

    proptest! {
        #[test]
        fn softmax_sums_to_one_and_is_shift_invariant(
            z in prop::collection::vec(-30.0f64..30.0, 2..42),
            c in -100.0f64..100.0,
        ) {
            let p = softmax_forward(&z);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
            let q = softmax_forward(&shifted);
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn softce_nonnegative_and_entropy_at_match(
            z in prop::collection::vec(-10.0f64..10.0, 5),
            raw in prop::collection::vec(0.0f64..1.0, 5),
        ) {
            let total: f64 = raw.iter().sum::<f64>() + 1e-9;
            let t: Vec<f64> = raw.iter().map(|r| (r + 1e-9 / 5.0) / total).collect();
            let (loss, _) = softce_loss_and_grad(&z, &t).unwrap();
            prop_assert!(loss >= 0.0);
            let p = softmax_forward(&z);
            let (self_loss, _) = softce_loss_and_grad(&z, &p).unwrap();
            let entropy: f64 = -p.iter().map(|&q| if q > 0.0 { q * q.ln() } else { 0.0 }).sum::<f64>();
            prop_assert!((self_loss - entropy).abs() < 1e-9);
        }
    }
}
