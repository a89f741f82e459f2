//! Preprocessing from raw telemetry files to `pairs.jsonl` + `schema.json`.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{write_pairs, PairRecord, SplitTag};
use crate::error::{Error, Result};
use crate::features::{encode, fit_schema, split_indices, EncodingSchema, FeatureRecord};
use crate::telemetry::{
    filter_sessions, merge_all, GameRecord, PlayerGamePair, PlayerRecord, SessionRecord,
};

pub const PAIRS_FILE: &str = "pairs.jsonl";
pub const SCHEMA_FILE: &str = "schema.json";
pub const PREP_STATS_FILE: &str = "prep_stats.json";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepConfig {
    pub seed: u64,
    pub train_ratio: f64,
}

impl Default for PrepConfig {
    fn default() -> Self {
        Self { seed: 0, train_ratio: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrepStats {
    pub sessions_in: usize,
    pub sessions_kept: usize,
    pub players_kept: usize,
    pub pairs: usize,
    pub train_pairs: usize,
    pub val_pairs: usize,
    pub width: usize,
}

#[derive(Debug, Clone)]
pub struct Prepared {
    pub pairs: Vec<PairRecord>,
    pub schema: EncodingSchema,
    pub stats: PrepStats,
}

fn pair_features(
    pair: &PlayerGamePair,
    players: &HashMap<&str, &PlayerRecord>,
    games: &HashMap<&str, &GameRecord>,
) -> Result<FeatureRecord> {
    let p = players.get(pair.player_guid.as_str()).ok_or_else(|| Error::UnknownId(format!("player {}", pair.player_guid)))?;
    let g = games.get(pair.game_id.as_str()).ok_or_else(|| Error::UnknownId(format!("game {}", pair.game_id)))?;
    let mut f = pair.features.clone();
    f.extend(p.features());
    f.extend(g.features());
    Ok(f)
}

/// Filters sessions, merges them per (player, game), splits the pairs, fits
/// the encoder on the training side and encodes everything.
pub fn prep(sessions: Vec<SessionRecord>, players: &[PlayerRecord], games: &[GameRecord], cfg: &PrepConfig) -> Result<Prepared> {
    for s in &sessions {
        s.validate()?;
    }
    for p in players {
        p.validate()?;
    }
    for g in games {
        g.validate()?;
    }
    let sessions_in = sessions.len();
    let kept = filter_sessions(sessions);
    let sessions_kept = kept.len();
    let merged = merge_all(&kept)?;
    if merged.len() < 2 {
        return Err(Error::InvalidInput(format!("{} player-game pairs survive filtering; need at least 2", merged.len())));
    }
    let by_player: HashMap<&str, &PlayerRecord> = players.iter().map(|p| (p.guid.as_str(), p)).collect();
    let by_game: HashMap<&str, &GameRecord> = games.iter().map(|g| (g.id.as_str(), g)).collect();
    let raw: Vec<FeatureRecord> = merged.iter().map(|m| pair_features(m, &by_player, &by_game)).collect::<Result<_>>()?;

    let (train_idx, val_idx) = split_indices(merged.len(), cfg.train_ratio, cfg.seed)?;
    let mut tags = vec![SplitTag::Val; merged.len()];
    for &i in &train_idx {
        tags[i] = SplitTag::Train;
    }
    let train_raw: Vec<FeatureRecord> = train_idx.iter().map(|&i| raw[i].clone()).collect();
    let schema = fit_schema(&train_raw)?;

    let pairs: Vec<PairRecord> = merged
        .iter()
        .zip(&raw)
        .zip(&tags)
        .map(|((m, f), &split)| {
            Ok(PairRecord {
                player_guid: m.player_guid.clone(),
                game_id: m.game_id.clone(),
                split,
                session_count: m.session_count,
                features: encode::<f64>(f, &schema)?.0,
                class_counts: m.histogram.to_classes().to_vec(),
                bins: m.histogram.counts().to_vec(),
            })
        })
        .collect::<Result<_>>()?;
    let players_kept = {
        let mut ids: Vec<&str> = merged.iter().map(|m| m.player_guid.as_str()).collect();
        ids.dedup();
        ids.len()
    };
    let stats = PrepStats {
        sessions_in,
        sessions_kept,
        players_kept,
        pairs: pairs.len(),
        train_pairs: train_idx.len(),
        val_pairs: val_idx.len(),
        width: schema.width,
    };
    Ok(Prepared { pairs, schema, stats })
}

pub fn write_prepared(dir: &Path, out: &Prepared) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_pairs(&dir.join(PAIRS_FILE), &out.pairs)?;
    for (name, value) in [
        (SCHEMA_FILE, serde_json::to_value(&out.schema)),
        (PREP_STATS_FILE, serde_json::to_value(&out.stats)),
    ] {
        let path = dir.join(name);
        let value = value.map_err(|e| Error::parse(name, e))?;
        let mut text = serde_json::to_string_pretty(&value).map_err(|e| Error::parse(name, e))?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

pub fn read_schema(path: &Path) -> Result<EncodingSchema> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate, GeneratorConfig};

    fn small() -> crate::synthgen::GeneratedData {
        generate(&GeneratorConfig { n_players: 40, n_games: 8, ..GeneratorConfig::default() }).unwrap()
    }

    #[test]
    fn prep_on_generated_data() {
        let data = small();
        let out = prep(data.sessions.clone(), &data.players, &data.games, &PrepConfig::default()).unwrap();
        assert_eq!(out.stats.pairs, out.stats.train_pairs + out.stats.val_pairs);
        assert_eq!(out.stats.train_pairs, (out.stats.pairs as f64 * 0.8).round() as usize);
        assert!(out.pairs.iter().all(|p| p.features.len() == out.schema.width));
        for p in &out.pairs {
            assert_eq!(p.class_counts.iter().sum::<u64>(), p.bins.iter().sum::<u64>());
        }
        let again = prep(data.sessions, &data.players, &data.games, &PrepConfig::default()).unwrap();
        assert_eq!(out.pairs, again.pairs);
    }

    #[test]
    fn unknown_player_is_an_error() {
        let data = small();
        let err = prep(data.sessions, &data.players[1..], &data.games, &PrepConfig::default()).unwrap_err();
        assert_eq!(err.kind(), "unknown_id");
    }
}
