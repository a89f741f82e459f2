//! Centralized training loop and model evaluation.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::SoftmaxRegressor;
use crate::dataset::EncodedPair;
use crate::distribution::ClassDistribution;
use crate::error::{Error, Result};
use crate::lkk::{ArchConfig, GatePolicy, LkkModel, Path};
use crate::metrics::{evaluate, MetricsReport};
use crate::nn::{Adam, AdamConfig};
use crate::rng::{substream, Stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateConfig {
    pub player_min_records: u64,
    pub game_min_records: u64,
}

impl Default for GateConfig {
    fn default() -> Self {
        Self { player_min_records: 3, game_min_records: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub seed: u64,
    pub arch: ArchConfig,
    pub adam: AdamConfig,
    pub l1: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub gate: GateConfig,
    /// Validate every this many epochs or rounds (0 disables).
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            arch: ArchConfig::default(),
            adam: AdamConfig::default(),
            l1: 1e-9,
            epochs: 100,
            batch_size: 256,
            gate: GateConfig::default(),
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be positive".into()));
        }
        if !(self.l1 >= 0.0) {
            return Err(Error::Config("l1 must be non-negative".into()));
        }
        if !(self.adam.lr >= 0.0) || !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(Error::Config(format!("bad optimizer settings {:?}", self.adam)));
        }
        Ok(())
    }

    /// Model for `train`: input width and class count come from the data.
    pub fn init_model<S: Scalar>(&self, train: &[EncodedPair<S>]) -> Result<LkkModel<S>> {
        let first = train.first().ok_or_else(|| Error::InvalidInput("no training pairs".into()))?;
        let arch = ArchConfig { input_dim: first.x.len(), num_classes: first.target.k(), ..self.arch };
        let mut model = LkkModel::new(arch, self.seed)?;
        model.register_all(train);
        Ok(model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    #[serde(rename = "val_WD")]
    pub val_wd: Option<f64>,
    #[serde(rename = "val_CE")]
    pub val_ce: Option<f64>,
    pub wall_ms: u64,
}

/// A trained model together with its gate counters and training log.
#[derive(Debug, Clone)]
pub struct Trained<S, L> {
    pub model: LkkModel<S>,
    pub gate: GatePolicy,
    pub log: Vec<L>,
}

/// Predictions for every pair, gated or with a forced path.
pub fn predict_all<S: Scalar>(
    model: &LkkModel<S>,
    pairs: &[EncodedPair<S>],
    gate: &GatePolicy,
    force: Option<Path>,
) -> Result<Vec<(ClassDistribution<S>, Path)>> {
    pairs
        .par_iter()
        .map(|p| {
            let path = force.unwrap_or_else(|| gate.path_for(&p.player_guid, &p.game_id));
            let out = model.forward_paths(&p.x, &p.player_guid, &p.game_id)?;
            Ok((out.get(path).clone(), path))
        })
        .collect()
}

pub fn evaluate_model<S: Scalar>(
    model: &LkkModel<S>,
    pairs: &[EncodedPair<S>],
    gate: &GatePolicy,
    force: Option<Path>,
) -> Result<MetricsReport> {
    let preds: Vec<_> = predict_all(model, pairs, gate, force)?.into_iter().map(|(d, _)| d).collect();
    let gts: Vec<_> = pairs.iter().map(|p| p.target.clone()).collect();
    evaluate(&gts, &preds)
}

pub fn evaluate_baseline<S: Scalar>(model: &SoftmaxRegressor<S>, pairs: &[EncodedPair<S>]) -> Result<MetricsReport> {
    let preds = pairs.par_iter().map(|p| model.predict(&p.x)).collect::<Result<Vec<_>>>()?;
    let gts: Vec<_> = pairs.iter().map(|p| p.target.clone()).collect();
    evaluate(&gts, &preds)
}

/// Metrics of a constant uniform prediction.
pub fn evaluate_uniform<S: Scalar>(pairs: &[EncodedPair<S>]) -> Result<MetricsReport> {
    let k = pairs.first().map(|p| p.target.k()).unwrap_or(0);
    let preds = vec![ClassDistribution::uniform(k); pairs.len()];
    let gts: Vec<_> = pairs.iter().map(|p| p.target.clone()).collect();
    evaluate(&gts, &preds)
}

pub(crate) fn validation<S: Scalar>(
    model: &LkkModel<S>,
    val: &[EncodedPair<S>],
    gate: &GatePolicy,
    due: bool,
) -> Result<(Option<f64>, Option<f64>)> {
    if !due || val.is_empty() {
        return Ok((None, None));
    }
    let r = evaluate_model(model, val, gate, None)?;
    Ok((Some(r.wd), Some(r.ce)))
}

/// Mini-batch Adam over shuffled training pairs. All four paths are
/// trained on every sample regardless of the gate.
pub fn run_centralized<S: Scalar>(
    train: &[EncodedPair<S>],
    val: &[EncodedPair<S>],
    cfg: &TrainConfig,
) -> Result<Trained<S, EpochLog>> {
    cfg.validate()?;
    let mut model = cfg.init_model(train)?;
    let mut gate = GatePolicy::new(cfg.gate.player_min_records, cfg.gate.game_min_records);
    let mut adam = Adam::new(cfg.adam);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut substream(cfg.seed, Stream::Batching, epoch as u64));
        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&EncodedPair<S>> = chunk.iter().map(|&i| &train[i]).collect();
            let (loss, grads) = model.batch_gradient(&batch, cfg.l1)?;
            adam.step(model.params_mut(), &grads)?;
            for s in &batch {
                gate.record(&s.player_guid, &s.game_id);
            }
            loss_sum += loss.as_f64() * batch.len() as f64;
        }
        let due = cfg.eval_every > 0 && ((epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs);
        let (val_wd, val_ce) = validation(&model, val, &gate, due)?;
        log.push(EpochLog {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_wd,
            val_ce,
            wall_ms: start.elapsed().as_millis() as u64,
        });
        log::debug!("epoch {epoch}: loss {:.5}", loss_sum / train.len() as f64);
    }
    Ok(Trained { model, gate, log })
}
