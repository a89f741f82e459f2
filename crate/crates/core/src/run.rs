//! Run configuration and the train/eval/ablate/predict drivers shared by
//! the command-line tool and the integration tests.

use std::fs;
use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::{SoftmaxRegressor, SoftmaxTrainConfig};
use crate::checkpoint::{self, Checkpoint, Loaded};
use crate::dataset::{to_samples, EncodedPair, PairRecord};
use crate::distribution::ClassDistribution;
use crate::error::{Error, Result};
use crate::features::{encode, EncodingSchema, FeatureRecord};
use crate::fedsim::{run_federated, RoundConfig};
use crate::lkk::{GradCheckConfig, Path};
use crate::metrics::MetricsReport;
use crate::pipeline::PrepConfig;
use crate::synthgen::GeneratorConfig;
use crate::telemetry::{io, GameRecord, PlayerRecord, NUM_BINS, NUM_CLASSES};
use crate::train::{evaluate_baseline, evaluate_model, run_centralized, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    Centralized,
    Federated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    Lkk,
    SoftmaxRegression,
}

/// Complete run specification. The top-level `seed` replaces the seed of
/// every section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub seed: u64,
    /// 5 or 42
    pub num_classes: usize,
    pub mode: TrainMode,
    pub model: ModelChoice,
    pub pairs: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub generator: GeneratorConfig,
    pub prep: PrepConfig,
    pub train: TrainConfig,
    pub rounds: RoundConfig,
    pub softmax: SoftmaxTrainConfig,
    pub gradcheck: GradCheckConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            num_classes: NUM_CLASSES,
            mode: TrainMode::Federated,
            model: ModelChoice::Lkk,
            pairs: None,
            out: None,
            generator: GeneratorConfig::default(),
            prep: PrepConfig::default(),
            train: TrainConfig::default(),
            rounds: RoundConfig::default(),
            softmax: SoftmaxTrainConfig::default(),
            gradcheck: GradCheckConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::parse("run config", e))?;
        cfg.validate()?;
        Ok(cfg.resolved())
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes != NUM_CLASSES && self.num_classes != NUM_BINS {
            return Err(Error::Config(format!("num_classes must be 5 or 42, got {}", self.num_classes)));
        }
        self.generator.validate()?;
        self.train.validate()?;
        if !(self.prep.train_ratio > 0.0 && self.prep.train_ratio < 1.0) {
            return Err(Error::Config(format!("prep.train_ratio must be in (0,1), got {}", self.prep.train_ratio)));
        }
        Ok(())
    }

    /// Copy with the top-level seed pushed into every section.
    pub fn resolved(&self) -> Self {
        let mut c = self.clone();
        c.generator.seed = c.seed;
        c.prep.seed = c.seed;
        c.train.seed = c.seed;
        c.softmax.seed = c.seed;
        c.gradcheck.seed = c.seed;
        c
    }
}

pub const CHECKPOINT_DIR: &str = "checkpoint";
pub const TRAIN_LOG_FILE: &str = "train_log.jsonl";
pub const VAL_REPORT_FILE: &str = "val_report.json";
pub const CONFIG_FILE: &str = "config.json";

pub(crate) fn write_pretty<T: Serialize>(path: &FsPath, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path.display().to_string(), e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Trains on the `train` split of `pairs`, then writes the checkpoint, the
/// per-epoch or per-round log and the validation report into `out`.
pub fn run_training(cfg: &RunConfig, pairs: &[PairRecord], schema: Option<&EncodingSchema>, out: &FsPath) -> Result<MetricsReport> {
    let cfg = cfg.resolved();
    cfg.validate()?;
    if let Some(s) = schema {
        if let Some(p) = pairs.first() {
            if p.features.len() != s.width {
                return Err(Error::ShapeMismatch { expected: s.width, got: p.features.len() });
            }
        }
    }
    let (train, val) = to_samples::<f64>(pairs, cfg.num_classes)?;
    if train.is_empty() {
        return Err(Error::InvalidInput("no training pairs".into()));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let ckpt = out.join(CHECKPOINT_DIR);
    let log_path = out.join(TRAIN_LOG_FILE);
    let report = match cfg.model {
        ModelChoice::Lkk => {
            let (model, gate, report) = match cfg.mode {
                TrainMode::Centralized => {
                    let t = run_centralized(&train, &val, &cfg.train)?;
                    io::write_jsonl(&log_path, &t.log)?;
                    let r = evaluate_or_empty(&val, |v| evaluate_model(&t.model, v, &t.gate, None))?;
                    (t.model, t.gate, r)
                }
                TrainMode::Federated => {
                    let t = run_federated(&train, &val, &cfg.train, &cfg.rounds)?;
                    io::write_jsonl(&log_path, &t.log)?;
                    let r = evaluate_or_empty(&val, |v| evaluate_model(&t.model, v, &t.gate, None))?;
                    (t.model, t.gate, r)
                }
            };
            checkpoint::save_lkk(&ckpt, &model, &gate, schema)?;
            report
        }
        ModelChoice::SoftmaxRegression => {
            let m = SoftmaxRegressor::train(&train, &cfg.softmax)?;
            io::write_jsonl::<serde_json::Value>(&log_path, &[])?;
            checkpoint::save_softmax(&ckpt, &m, schema)?;
            evaluate_or_empty(&val, |v| evaluate_baseline(&m, v))?
        }
    };
    write_pretty(&out.join(VAL_REPORT_FILE), &report)?;
    write_pretty(&out.join(CONFIG_FILE), &cfg)?;
    Ok(report)
}

fn evaluate_or_empty(val: &[EncodedPair<f64>], f: impl FnOnce(&[EncodedPair<f64>]) -> Result<MetricsReport>) -> Result<MetricsReport> {
    if val.is_empty() {
        return Err(Error::InvalidInput("no validation pairs".into()));
    }
    f(val)
}

/// Which rows of `pairs.jsonl` to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitSelect {
    Train,
    Val,
    All,
}

pub fn select_samples(loaded: &Loaded<f64>, pairs: &[PairRecord], which: SplitSelect) -> Result<Vec<EncodedPair<f64>>> {
    let k = loaded.manifest.num_classes;
    let width = match &loaded.checkpoint {
        Checkpoint::Lkk { model, .. } => model.arch().input_dim,
        Checkpoint::Softmax(m) => m.width(),
    };
    if let Some(p) = pairs.iter().find(|p| p.features.len() != width) {
        return Err(Error::ShapeMismatch { expected: width, got: p.features.len() });
    }
    let (train, val) = to_samples::<f64>(pairs, k)?;
    let out = match which {
        SplitSelect::Train => train,
        SplitSelect::Val => val,
        SplitSelect::All => train.into_iter().chain(val).collect(),
    };
    if out.is_empty() {
        return Err(Error::InvalidInput(format!("no pairs in the {which:?} split")));
    }
    Ok(out)
}

/// Metrics of a checkpoint on `samples`. A forced path applies only to the
/// knowledge-kernel model.
pub fn evaluate_checkpoint(loaded: &Loaded<f64>, samples: &[EncodedPair<f64>], force: Option<Path>) -> Result<MetricsReport> {
    match &loaded.checkpoint {
        Checkpoint::Lkk { model, gate } => evaluate_model(model, samples, gate, force),
        Checkpoint::Softmax(m) => {
            if force.is_some() {
                return Err(Error::InvalidInput("--force-path needs a knowledge-kernel checkpoint".into()));
            }
            evaluate_baseline(m, samples)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub path: Path,
    #[serde(flatten)]
    pub report: MetricsReport,
}

/// Metrics with each of the four paths forced, in the order wo, wp, wg, wb.
pub fn ablation(loaded: &Loaded<f64>, samples: &[EncodedPair<f64>]) -> Result<Vec<AblationRow>> {
    Path::ALL
        .iter()
        .map(|&p| Ok(AblationRow { path: p, report: evaluate_checkpoint(loaded, samples, Some(p))? }))
        .collect()
}

pub fn ablation_csv(rows: &[AblationRow]) -> String {
    let mut out = String::from("path,WD,CE,MAE,KL,top1_acc,top2_acc,adjacent_acc,top1_macro_F1,n\n");
    for r in rows {
        let m = &r.report;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.path, m.wd, m.ce, m.mae, m.kl, m.top1_acc, m.top2_acc, m.adjacent_acc, m.top1_macro_f1, m.n
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub path_used: Option<Path>,
    pub probs: Vec<f64>,
}

/// Prediction for one (player, game) from raw attribute records. Absent
/// records or session attributes are encoded as missing.
pub fn predict_one(
    loaded: &Loaded<f64>,
    player: &str,
    game: &str,
    player_record: Option<&PlayerRecord>,
    game_record: Option<&GameRecord>,
) -> Result<Prediction> {
    let schema = loaded
        .schema
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("checkpoint has no schema.json; cannot encode features".into()))?;
    let mut raw = FeatureRecord::new();
    if let Some(p) = player_record {
        raw.extend(p.features());
    }
    if let Some(g) = game_record {
        raw.extend(g.features());
    }
    let x = encode::<f64>(&raw, schema)?.0;
    let (dist, path): (ClassDistribution<f64>, Option<Path>) = match &loaded.checkpoint {
        Checkpoint::Lkk { model, gate } => {
            let (d, p) = model.predict(&x, player, game, gate)?;
            (d, Some(p))
        }
        Checkpoint::Softmax(m) => (m.predict(&x)?, None),
    };
    Ok(Prediction { path_used: path, probs: dist.into_inner() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_propagates() {
        let cfg = RunConfig::from_json(r#"{"seed": 9, "train": {"seed": 1, "epochs": 2}}"#).unwrap();
        assert_eq!((cfg.train.seed, cfg.generator.seed, cfg.prep.seed), (9, 9, 9));
        assert_eq!(cfg.train.epochs, 2);
        assert!(RunConfig::from_json(r#"{"num_classes": 7}"#).is_err());
    }
}
