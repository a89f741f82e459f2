//! Finite-difference check of the full four-path model gradient.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::model::{ArchConfig, LkkModel};
use crate::dataset::EncodedPair;
use crate::distribution::ClassDistribution;
use crate::error::Result;
use crate::nn::{grad_check_at, gradcheck::sample_coords, GradCheckReport, ParamKind};
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub arch: ArchConfig,
    pub samples: usize,
    pub players: usize,
    pub games: usize,
    /// Coordinates checked per parameter array.
    pub per_param: usize,
    pub step: f64,
    pub tolerance: f64,
    pub l1: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            arch: ArchConfig { input_dim: 12, ..ArchConfig::default() },
            samples: 8,
            players: 3,
            games: 2,
            per_param: 24,
            step: 1e-5,
            tolerance: 1e-4,
            l1: 1e-9,
        }
    }
}

/// Builds a random model with non-zero merge layers and a random batch,
/// then compares the analytic gradient with central differences on a
/// sample of coordinates from every parameter array.
pub fn check_lkk_gradients(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let mut rng = stream(cfg.seed, Stream::GradCheck);
    let mut model = LkkModel::<f64>::new(cfg.arch, cfg.seed)?;
    let k = cfg.arch.num_classes;
    let batch: Vec<EncodedPair<f64>> = (0..cfg.samples)
        .map(|i| {
            let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.01..1.0)).collect();
            let total: f64 = raw.iter().sum();
            EncodedPair {
                player_guid: format!("p{}", i % cfg.players.max(1)),
                game_id: format!("g{}", i % cfg.games.max(1)),
                x: (0..cfg.arch.input_dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
                target: ClassDistribution::new(raw.iter().map(|v| v / total).collect()).expect("normalized"),
            }
        })
        .collect();
    model.register_all(&batch);
    let scale = 1.0 / ((cfg.arch.latent_dim + cfg.arch.kernel_dim) as f64).sqrt();
    let (mp, mg) = model.merge_layers();
    for id in [mp.weight, mp.bias, mg.weight, mg.bias] {
        for v in model.params_mut().data_mut(id) {
            *v = rng.random_range(-scale..scale);
        }
    }
    let refs: Vec<&EncodedPair<f64>> = batch.iter().collect();
    let (_, analytic) = model.batch_gradient(&refs, cfg.l1)?;
    let params = model.params().clone();
    // Coordinates sitting on the |w| kink of the L1 term are not differentiable.
    let coords: Vec<_> = sample_coords(&params, cfg.per_param, &[], &mut rng)
        .into_iter()
        .filter(|&(id, i)| params.get(id).kind != ParamKind::Weight || params.data(id)[i].abs() > 2.0 * cfg.step)
        .collect();
    grad_check_at(&params, &analytic, &coords, cfg.step, cfg.tolerance, |p| model.batch_loss_with(p, &refs, cfg.l1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_model_passes() {
        let cfg = GradCheckConfig {
            arch: ArchConfig { input_dim: 5, encoder_hidden: 9, latent_dim: 6, decoder_hidden: 7, kernel_dim: 4, ..ArchConfig::default() },
            per_param: 1000,
            ..GradCheckConfig::default()
        };
        let rep = check_lkk_gradients(&cfg).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.per_param.len(), 14);
    }
}
