//! Multinomial softmax regression on the encoded features.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::EncodedPair;
use crate::distribution::ClassDistribution;
use crate::error::{check_len, Error, Result};
use crate::nn::{
    dense_backward, dense_forward, l1_penalty_and_grad, softce_loss_and_grad, softmax_forward, Adam, AdamConfig, DenseLayer,
    ParamKind, ParamStore,
};
use crate::rng::{substream, Stream};
use crate::scalar::{CompensatedSum, Scalar};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SoftmaxTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub l1: f64,
    pub seed: u64,
}

impl Default for SoftmaxTrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 256, adam: AdamConfig::default(), l1: 1e-9, seed: 0 }
    }
}

#[derive(Debug, Clone)]
pub struct SoftmaxRegressor<S> {
    params: ParamStore<S>,
    layer: DenseLayer,
}

impl<S: Scalar> SoftmaxRegressor<S> {
    /// All-zero weights, which predict the uniform distribution.
    pub fn zeros(width: usize, num_classes: usize) -> Self {
        let mut params = ParamStore::new();
        let weight = params.add("softmax.weight", vec![num_classes, width], ParamKind::Weight, vec![S::zero(); width * num_classes]);
        let bias = params.add("softmax.bias", vec![num_classes], ParamKind::Bias, vec![S::zero(); num_classes]);
        Self { params, layer: DenseLayer { weight, bias, in_dim: width, out_dim: num_classes } }
    }

    pub fn from_params(params: ParamStore<S>) -> Result<Self> {
        let (Some(weight), Some(bias)) = (params.find("softmax.weight"), params.find("softmax.bias")) else {
            return Err(Error::InvalidInput("not a softmax-regression parameter set".into()));
        };
        let shape = params.get(weight).shape.clone();
        if shape.len() != 2 || params.get(bias).shape != [shape[0]] {
            return Err(Error::InvalidInput(format!("bad softmax-regression shapes {shape:?}")));
        }
        Ok(Self { layer: DenseLayer { weight, bias, in_dim: shape[1], out_dim: shape[0] }, params })
    }

    pub fn params(&self) -> &ParamStore<S> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamStore<S> {
        &mut self.params
    }

    pub fn width(&self) -> usize {
        self.layer.in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.layer.out_dim
    }

    fn logits(&self, params: &ParamStore<S>, x: &[S]) -> Result<Vec<S>> {
        let mut z = vec![S::zero(); self.layer.out_dim];
        dense_forward(params.data(self.layer.weight), params.data(self.layer.bias), x, &mut z)?;
        Ok(z)
    }

    /// `softmax(Wx + b)`.
    pub fn predict(&self, x: &[S]) -> Result<ClassDistribution<S>> {
        check_len(self.layer.in_dim, x.len())?;
        Ok(ClassDistribution::from_softmax(softmax_forward(&self.logits(&self.params, x)?)))
    }

    /// Mean soft-target cross-entropy plus L1, and its gradient, at `params`.
    pub fn loss_and_grad_with(&self, params: &ParamStore<S>, batch: &[&EncodedPair<S>], l1: f64) -> Result<(S, ParamStore<S>)> {
        if batch.is_empty() {
            return Err(Error::InvalidInput("empty batch".into()));
        }
        let scale = S::one() / S::of(batch.len() as f64);
        let mut grads = params.zeros_like();
        let mut total = CompensatedSum::new();
        for s in batch {
            let (loss, mut d) = softce_loss_and_grad(&self.logits(params, &s.x)?, s.target.probs())?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("loss for sample ({}, {})", s.player_guid, s.game_id)));
            }
            total.add(loss);
            d.iter_mut().for_each(|v| *v *= scale);
            let (dw, db) = grads.pair_mut(self.layer.weight, self.layer.bias);
            dense_backward(params.data(self.layer.weight), &s.x, &d, dw, db, None)?;
        }
        let penalty = l1_penalty_and_grad(params, l1, &mut grads)?;
        Ok((total.value() * scale + penalty, grads))
    }

    pub fn loss_and_grad(&self, batch: &[&EncodedPair<S>], l1: f64) -> Result<(S, ParamStore<S>)> {
        self.loss_and_grad_with(&self.params, batch, l1)
    }

    /// Adam on shuffled mini-batches, starting from zero weights.
    pub fn train(train: &[EncodedPair<S>], cfg: &SoftmaxTrainConfig) -> Result<Self> {
        let first = train.first().ok_or_else(|| Error::InvalidInput("no training pairs".into()))?;
        if cfg.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        let mut model = Self::zeros(first.x.len(), first.target.k());
        let mut adam = Adam::new(cfg.adam);
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 0..cfg.epochs {
            order.shuffle(&mut substream(cfg.seed, Stream::Batching, epoch as u64));
            for chunk in order.chunks(cfg.batch_size) {
                let batch: Vec<&EncodedPair<S>> = chunk.iter().map(|&i| &train[i]).collect();
                let (_, grads) = model.loss_and_grad(&batch, cfg.l1)?;
                adam.step(&mut model.params, &grads)?;
            }
        }
        Ok(model)
    }
}
