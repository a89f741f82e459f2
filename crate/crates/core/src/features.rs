//! Encoding of merged player/game/session records into fixed-width numeric
//! vectors, and the train/validation split.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::rng::{self, Stream};
use crate::scalar::Scalar;

pub const SCHEMA_VERSION: u32 = 1;

/// One raw, possibly-missing feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum RawValue {
    Numeric(Option<f64>),
    Categorical(Option<String>),
    /// Multi-label categorical (a game can carry several genres).
    Tags(Option<Vec<String>>),
}

impl RawValue {
    fn kind(&self) -> &'static str {
        match self {
            RawValue::Numeric(_) => "numeric",
            RawValue::Categorical(_) => "categorical",
            RawValue::Tags(_) => "tags",
        }
    }

    pub fn is_missing(&self) -> bool {
        match self {
            RawValue::Numeric(v) => v.is_none(),
            RawValue::Categorical(v) => v.is_none(),
            RawValue::Tags(v) => v.is_none(),
        }
    }
}

/// Named raw features; key order fixes the encoded column order.
pub type FeatureRecord = BTreeMap<String, RawValue>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureSpec {
    Numeric { name: String, median: f64, mean: f64, std: f64 },
    Categorical { name: String, vocabulary: Vec<String> },
    Tags { name: String, vocabulary: Vec<String> },
}

impl FeatureSpec {
    pub fn name(&self) -> &str {
        match self {
            FeatureSpec::Numeric { name, .. }
            | FeatureSpec::Categorical { name, .. }
            | FeatureSpec::Tags { name, .. } => name,
        }
    }

    pub fn width(&self) -> usize {
        match self {
            FeatureSpec::Numeric { .. } => 1,
            FeatureSpec::Categorical { vocabulary, .. } | FeatureSpec::Tags { vocabulary, .. } => {
                vocabulary.len()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedFeature {
    pub name: String,
    pub reason: String,
}

/// Fitted encoding parameters. Immutable once fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSchema {
    pub version: u32,
    pub features: Vec<FeatureSpec>,
    pub dropped: Vec<DroppedFeature>,
    pub width: usize,
}

/// Encoded model input. All entries finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector<S>(pub Vec<S>);

impl<S> FeatureVector<S> {
    pub fn as_slice(&self) -> &[S] {
        &self.0
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Fits medians, z-score parameters and vocabularies on training records.
pub fn fit_schema(records: &[FeatureRecord]) -> Result<EncodingSchema> {
    if records.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "schema fitting needs at least 2 records, got {}",
            records.len()
        )));
    }

    let mut kinds: BTreeMap<&str, &'static str> = BTreeMap::new();
    for rec in records {
        for (name, v) in rec {
            let k = kinds.entry(name.as_str()).or_insert(v.kind());
            if *k != v.kind() {
                return Err(Error::InvalidInput(format!(
                    "feature {name} is {} in one record and {} in another",
                    k,
                    v.kind()
                )));
            }
        }
    }

    let mut features = Vec::new();
    let mut dropped = Vec::new();
    for (&name, &kind) in &kinds {
        let values = records.iter().filter_map(|r| r.get(name));
        match kind {
            "numeric" => {
                let mut observed = Vec::new();
                for v in values {
                    if let RawValue::Numeric(Some(x)) = v {
                        if !x.is_finite() {
                            return Err(Error::NonFinite(format!("{name} = {x}")));
                        }
                        observed.push(*x);
                    }
                }
                if observed.is_empty() {
                    dropped.push(DroppedFeature { name: name.into(), reason: "never observed".into() });
                    continue;
                }
                observed.sort_by(f64::total_cmp);
                let med = median(&observed);
                let filled: Vec<f64> = records
                    .iter()
                    .map(|r| match r.get(name) {
                        Some(RawValue::Numeric(Some(x))) => *x,
                        _ => med,
                    })
                    .collect();
                let n = filled.len() as f64;
                let mean = filled.iter().sum::<f64>() / n;
                let var = filled.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                let std = var.sqrt();
                if !(std > 1e-12 * mean.abs().max(1.0)) {
                    dropped.push(DroppedFeature { name: name.into(), reason: "zero variance".into() });
                    continue;
                }
                features.push(FeatureSpec::Numeric { name: name.into(), median: med, mean, std });
            }
            "categorical" | "tags" => {
                let mut vocab = BTreeSet::new();
                for v in values {
                    match v {
                        RawValue::Categorical(Some(c)) => {
                            vocab.insert(c.clone());
                        }
                        RawValue::Tags(Some(ts)) => vocab.extend(ts.iter().cloned()),
                        _ => {}
                    }
                }
                if vocab.is_empty() {
                    dropped.push(DroppedFeature { name: name.into(), reason: "never observed".into() });
                    continue;
                }
                let vocabulary = vocab.into_iter().collect();
                features.push(if kind == "tags" {
                    FeatureSpec::Tags { name: name.into(), vocabulary }
                } else {
                    FeatureSpec::Categorical { name: name.into(), vocabulary }
                });
            }
            _ => unreachable!(),
        }
    }

    let width = features.iter().map(FeatureSpec::width).sum();
    Ok(EncodingSchema { version: SCHEMA_VERSION, features, dropped, width })
}

impl EncodingSchema {
    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("schema serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Column names of the encoded vector, e.g. `player.os=Windows 10`.
    pub fn column_names(&self) -> Vec<String> {
        let mut out = Vec::with_capacity(self.width);
        for f in &self.features {
            match f {
                FeatureSpec::Numeric { name, .. } => out.push(name.clone()),
                FeatureSpec::Categorical { name, vocabulary } | FeatureSpec::Tags { name, vocabulary } => {
                    out.extend(vocabulary.iter().map(|v| format!("{name}={v}")))
                }
            }
        }
        out
    }
}

/// Encodes one record.
///
/// Missing numerics take the training median before z-scoring. A missing
/// categorical sets its whole one-hot group to 0.5; a category never seen in
/// training encodes as an all-zero group.
pub fn encode<S: Scalar>(record: &FeatureRecord, schema: &EncodingSchema) -> Result<FeatureVector<S>> {
    let mut out = Vec::with_capacity(schema.width);
    for spec in &schema.features {
        let raw = record.get(spec.name());
        match spec {
            FeatureSpec::Numeric { name, median, mean, std } => {
                let x = match raw {
                    None | Some(RawValue::Numeric(None)) => *median,
                    Some(RawValue::Numeric(Some(x))) => {
                        if !x.is_finite() {
                            return Err(Error::NonFinite(format!("{name} = {x}")));
                        }
                        *x
                    }
                    Some(other) => {
                        return Err(Error::InvalidInput(format!("{name}: expected numeric, got {}", other.kind())))
                    }
                };
                out.push(S::of((x - mean) / std));
            }
            FeatureSpec::Categorical { name, vocabulary } => match raw {
                None | Some(RawValue::Categorical(None)) => {
                    out.extend(std::iter::repeat_n(S::of(0.5), vocabulary.len()))
                }
                Some(RawValue::Categorical(Some(c))) => {
                    out.extend(vocabulary.iter().map(|v| if v == c { S::one() } else { S::zero() }))
                }
                Some(other) => {
                    return Err(Error::InvalidInput(format!(
                        "{name}: expected categorical, got {}",
                        other.kind()
                    )))
                }
            },
            FeatureSpec::Tags { name, vocabulary } => match raw {
                None | Some(RawValue::Tags(None)) => {
                    out.extend(std::iter::repeat_n(S::of(0.5), vocabulary.len()))
                }
                Some(RawValue::Tags(Some(tags))) => out.extend(
                    vocabulary.iter().map(|v| if tags.contains(v) { S::one() } else { S::zero() }),
                ),
                Some(other) => {
                    return Err(Error::InvalidInput(format!("{name}: expected tags, got {}", other.kind())))
                }
            },
        }
    }
    debug_assert_eq!(out.len(), schema.width);
    Ok(FeatureVector(out))
}

/// Seeded shuffle-and-cut into (train, validation). The number of training
/// items is `round(n * ratio)`, kept within `1..n` so neither side is empty.
pub fn split<T: Clone>(items: &[T], ratio: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let (train, val) = split_indices(items.len(), ratio, seed)?;
    Ok((
        train.iter().map(|&i| items[i].clone()).collect(),
        val.iter().map(|&i| items[i].clone()).collect(),
    ))
}

pub fn split_indices(n: usize, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::InvalidInput(format!("split ratio must be in (0,1), got {ratio}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 items to split, got {n}")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, Stream::Split));
    let n_train = ((n as f64 * ratio).round() as usize).clamp(1, n - 1);
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(pairs: &[(&str, RawValue)]) -> FeatureRecord {
        pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
    }

    fn num(x: Option<f64>) -> RawValue {
        RawValue::Numeric(x)
    }

    fn cat(x: Option<&str>) -> RawValue {
        RawValue::Categorical(x.map(String::from))
    }

    #[test]
    fn median_fill_uses_observed_values() {
        let recs: Vec<_> = [Some(1.0), Some(2.0), Some(100.0), None]
            .into_iter()
            .map(|x| rec(&[("a", num(x))]))
            .collect();
        let schema = fit_schema(&recs).unwrap();
        match &schema.features[0] {
            FeatureSpec::Numeric { median, .. } => assert_eq!(*median, 2.0),
            f => panic!("unexpected {f:?}"),
        }
    }

    #[test]
    fn constant_feature_dropped() {
        let recs: Vec<_> = (0..3).map(|i| rec(&[("c", num(Some(4.0))), ("x", num(Some(i as f64)))])).collect();
        let schema = fit_schema(&recs).unwrap();
        assert_eq!(schema.width, 1);
        assert_eq!(schema.dropped[0].name, "c");
    }

    #[test]
    fn vocabulary_is_distinct_values() {
        let recs: Vec<_> = ["A", "B", "A"].iter().map(|c| rec(&[("k", cat(Some(c)))])).collect();
        let schema = fit_schema(&recs).unwrap();
        assert_eq!(
            schema.features[0],
            FeatureSpec::Categorical { name: "k".into(), vocabulary: vec!["A".into(), "B".into()] }
        );
    }

    #[test]
    fn fit_rejects_tiny_input() {
        assert!(fit_schema(&[]).is_err());
        assert!(fit_schema(&[rec(&[("a", num(Some(1.0)))])]).is_err());
    }

    #[test]
    fn categorical_encodings() {
        let recs: Vec<_> = ["A", "B", "C"].iter().map(|c| rec(&[("k", cat(Some(c)))])).collect();
        let schema = fit_schema(&recs).unwrap();
        let missing: FeatureVector<f64> = encode(&rec(&[("k", cat(None))]), &schema).unwrap();
        assert_eq!(missing.0, vec![0.5, 0.5, 0.5]);
        let absent: FeatureVector<f64> = encode(&FeatureRecord::new(), &schema).unwrap();
        assert_eq!(absent.0, vec![0.5, 0.5, 0.5]);
        let unseen: FeatureVector<f64> = encode(&rec(&[("k", cat(Some("Z")))]), &schema).unwrap();
        assert_eq!(unseen.0, vec![0.0, 0.0, 0.0]);
        let b: FeatureVector<f64> = encode(&rec(&[("k", cat(Some("B")))]), &schema).unwrap();
        assert_eq!(b.0, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn numeric_at_mean_is_zero() {
        let recs: Vec<_> = [1.0, 2.0, 3.0].iter().map(|&x| rec(&[("a", num(Some(x)))])).collect();
        let schema = fit_schema(&recs).unwrap();
        let v: FeatureVector<f64> = encode(&rec(&[("a", num(Some(2.0)))]), &schema).unwrap();
        assert_eq!(v.0, vec![0.0]);
        assert!(encode::<f64>(&rec(&[("a", num(Some(f64::NAN)))]), &schema).is_err());
        assert!(encode::<f64>(&rec(&[("a", cat(Some("x")))]), &schema).is_err());
    }

    #[test]
    fn tags_multi_hot() {
        let recs = vec![
            rec(&[("g", RawValue::Tags(Some(vec!["Action".into(), "Shooter".into()])))]),
            rec(&[("g", RawValue::Tags(Some(vec!["RPG".into()])))]),
        ];
        let schema = fit_schema(&recs).unwrap();
        let v: FeatureVector<f64> = encode(&recs[0], &schema).unwrap();
        assert_eq!(v.0, vec![1.0, 0.0, 1.0]);
        let m: FeatureVector<f64> = encode(&rec(&[("g", RawValue::Tags(None))]), &schema).unwrap();
        assert_eq!(m.0, vec![0.5; 3]);
    }

    #[test]
    fn mixed_kinds_rejected() {
        let recs = vec![rec(&[("a", num(Some(1.0)))]), rec(&[("a", cat(Some("x")))])];
        assert!(fit_schema(&recs).is_err());
    }

    #[test]
    fn split_examples() {
        let items: Vec<u32> = (0..10).collect();
        let (tr, va) = split(&items, 0.8, 3).unwrap();
        assert_eq!((tr.len(), va.len()), (8, 2));
        let (tr2, va2) = split(&items, 0.8, 3).unwrap();
        assert_eq!((tr.clone(), va.clone()), (tr2, va2));
        let mut all: Vec<u32> = tr.into_iter().chain(va).collect();
        all.sort();
        assert_eq!(all, items);
        assert!(split(&items, 1.0, 3).is_err());
        assert!(split(&items, 0.0, 3).is_err());
        assert!(split(&items[..1], 0.5, 3).is_err());
    }

    #[test]
    fn hash_is_stable() {
        let recs: Vec<_> = [1.0, 2.0].iter().map(|&x| rec(&[("a", num(Some(x)))])).collect();
        let s = fit_schema(&recs).unwrap();
        assert_eq!(s.hash(), fit_schema(&recs).unwrap().hash());
        assert_eq!(s.hash().len(), 64);
    }
}
