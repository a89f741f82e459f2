//! Encoded player-game pairs, as stored in `pairs.jsonl`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::distribution::ClassDistribution;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::telemetry::{io, normalize, NUM_BINS, NUM_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Val,
}

/// One line of `pairs.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub player_guid: String,
    pub game_id: String,
    pub split: SplitTag,
    pub session_count: usize,
    pub features: Vec<f64>,
    pub class_counts: Vec<u64>,
    pub bins: Vec<u64>,
}

impl PairRecord {
    pub fn validate(&self) -> Result<()> {
        if self.class_counts.len() != NUM_CLASSES || self.bins.len() != NUM_BINS {
            return Err(Error::InvalidInput(format!(
                "pair ({}, {}) needs {NUM_CLASSES} class counts and {NUM_BINS} bins",
                self.player_guid, self.game_id
            )));
        }
        if self.features.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!("features of pair ({}, {})", self.player_guid, self.game_id)));
        }
        Ok(())
    }
}

pub fn read_pairs(path: &Path) -> Result<Vec<PairRecord>> {
    let pairs: Vec<PairRecord> = io::read_jsonl(path)?;
    let width = pairs.first().map(|p| p.features.len());
    for p in &pairs {
        p.validate()?;
        if Some(p.features.len()) != width {
            return Err(Error::ShapeMismatch { expected: width.unwrap_or(0), got: p.features.len() });
        }
    }
    Ok(pairs)
}

pub fn write_pairs(path: &Path, pairs: &[PairRecord]) -> Result<()> {
    io::write_jsonl(path, pairs)
}

/// A model-ready sample: features, ids and the normalized target.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedPair<S> {
    pub player_guid: String,
    pub game_id: String,
    pub x: Vec<S>,
    pub target: ClassDistribution<S>,
}

impl<S: Scalar> EncodedPair<S> {
    /// Builds the sample for a 5-class or 42-class target.
    pub fn from_record(r: &PairRecord, num_classes: usize) -> Result<Self> {
        let counts = match num_classes {
            NUM_CLASSES => &r.class_counts,
            NUM_BINS => &r.bins,
            k => return Err(Error::Config(format!("num_classes must be 5 or 42, got {k}"))),
        };
        Ok(Self {
            player_guid: r.player_guid.clone(),
            game_id: r.game_id.clone(),
            x: r.features.iter().map(|&v| S::of(v)).collect(),
            target: normalize(counts)?,
        })
    }
}

/// Splits records by their tag and converts them into samples.
pub fn to_samples<S: Scalar>(records: &[PairRecord], num_classes: usize) -> Result<(Vec<EncodedPair<S>>, Vec<EncodedPair<S>>)> {
    let mut train = Vec::new();
    let mut val = Vec::new();
    for r in records {
        let s = EncodedPair::from_record(r, num_classes)?;
        match r.split {
            SplitTag::Train => train.push(s),
            SplitTag::Val => val.push(s),
        }
    }
    Ok((train, val))
}
