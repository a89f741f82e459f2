//! Per-session records, session filtering and player-game merging.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::histogram::FpsHistogram42;
use crate::error::{Error, Result};
use crate::features::{FeatureRecord, RawValue};

/// Sessions shorter than this are dominated by menus and loading screens.
pub const MIN_SESSION_SECONDS: f64 = 300.0;
/// Players with fewer surviving sessions are dropped entirely.
pub const MIN_SESSIONS_PER_PLAYER: usize = 18;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum WindowedMode {
    Window,
    Full,
    Unknown,
}

impl WindowedMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WindowedMode::Window => "Window",
            WindowedMode::Full => "Full",
            WindowedMode::Unknown => "Unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub player_guid: String,
    pub game_id: String,
    pub duration_s: f64,
    pub windowed_mode: WindowedMode,
    pub game_mode_on: Option<bool>,
    #[serde(rename = "bins")]
    pub histogram: FpsHistogram42,
    pub avg_fps: f64,
}

impl SessionRecord {
    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "session {}/{}: duration_s must be positive, got {}",
                self.player_guid, self.game_id, self.duration_s
            )));
        }
        if self.histogram.total() == 0 {
            return Err(Error::InvalidInput(format!(
                "session {}/{}: histogram has no samples",
                self.player_guid, self.game_id
            )));
        }
        if !(self.avg_fps >= 0.0 && self.avg_fps.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "session {}/{}: avg_fps must be finite and non-negative",
                self.player_guid, self.game_id
            )));
        }
        Ok(())
    }
}

/// Drops short sessions, then drops every session of players left with
/// fewer than 18. Order of the survivors is preserved.
pub fn filter_sessions(sessions: Vec<SessionRecord>) -> Vec<SessionRecord> {
    let long: Vec<SessionRecord> =
        sessions.into_iter().filter(|s| s.duration_s >= MIN_SESSION_SECONDS).collect();
    let mut per_player: HashMap<&str, usize> = HashMap::new();
    for s in &long {
        *per_player.entry(s.player_guid.as_str()).or_default() += 1;
    }
    let keep: std::collections::HashSet<String> = per_player
        .into_iter()
        .filter(|&(_, n)| n >= MIN_SESSIONS_PER_PLAYER)
        .map(|(p, _)| p.to_string())
        .collect();
    long.into_iter().filter(|s| keep.contains(&s.player_guid)).collect()
}

/// All sessions of one player on one game, merged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayerGamePair {
    pub player_guid: String,
    pub game_id: String,
    pub histogram: FpsHistogram42,
    pub session_count: usize,
    /// Unweighted mean of the session averages. Carried along, not encoded.
    pub avg_fps: f64,
    pub features: FeatureRecord,
}

/// Most frequent value; ties go to the lexicographically smallest.
pub(crate) fn mode<'a, I: IntoIterator<Item = &'a str>>(values: I) -> Option<String> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for v in values {
        *counts.entry(v).or_default() += 1;
    }
    // BTreeMap iterates ascending, so the first maximum wins ties.
    let mut best: Option<(&str, usize)> = None;
    for (v, n) in counts {
        if best.is_none_or(|(_, bn)| n > bn) {
            best = Some((v, n));
        }
    }
    best.map(|(v, _)| v.to_string())
}

/// Merges the sessions of one (player, game): numeric values are averaged,
/// categorical and boolean values take the mode, histograms are summed.
pub fn merge_to_pair(sessions: &[SessionRecord]) -> Result<PlayerGamePair> {
    let first = sessions.first().ok_or_else(|| Error::InvalidInput("no sessions to merge".into()))?;
    let (player, game) = (&first.player_guid, &first.game_id);
    if let Some(bad) = sessions.iter().find(|s| &s.player_guid != player || &s.game_id != game) {
        return Err(Error::InvalidInput(format!(
            "mixed keys in merge: {player}/{game} vs {}/{}",
            bad.player_guid, bad.game_id
        )));
    }
    let n = sessions.len() as f64;
    let mut histogram = FpsHistogram42::default();
    for s in sessions {
        histogram.merge(&s.histogram);
    }
    let avg_fps = sessions.iter().map(|s| s.avg_fps).sum::<f64>() / n;
    let duration = sessions.iter().map(|s| s.duration_s).sum::<f64>() / n;
    let windowed = mode(sessions.iter().map(|s| s.windowed_mode.as_str()));
    let bools: Vec<&str> = sessions
        .iter()
        .filter_map(|s| s.game_mode_on.map(|b| if b { "true" } else { "false" }))
        .collect();
    let game_mode = mode(bools);

    let mut features = FeatureRecord::new();
    features.insert("session.duration_s".into(), RawValue::Numeric(Some(duration)));
    features.insert("session.windowed_mode".into(), RawValue::Categorical(windowed));
    features.insert("session.game_mode_on".into(), RawValue::Categorical(game_mode));

    Ok(PlayerGamePair {
        player_guid: player.clone(),
        game_id: game.clone(),
        histogram,
        session_count: sessions.len(),
        avg_fps,
        features,
    })
}

/// Groups sessions by (player, game) and merges each group. Output is sorted
/// by player then game.
pub fn merge_all(sessions: &[SessionRecord]) -> Result<Vec<PlayerGamePair>> {
    let mut groups: BTreeMap<(&str, &str), Vec<SessionRecord>> = BTreeMap::new();
    for s in sessions {
        groups.entry((&s.player_guid, &s.game_id)).or_default().push(s.clone());
    }
    groups.values().map(|g| merge_to_pair(g)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::histogram::NUM_BINS;

    fn session(p: &str, g: &str, dur: f64, avg: f64, wm: WindowedMode) -> SessionRecord {
        let mut c = [0; NUM_BINS];
        c[(avg as usize / 5).min(41)] = 10;
        SessionRecord {
            player_guid: p.into(),
            game_id: g.into(),
            duration_s: dur,
            windowed_mode: wm,
            game_mode_on: Some(true),
            histogram: FpsHistogram42::new(c),
            avg_fps: avg,
        }
    }

    #[test]
    fn short_session_removed() {
        let mut ss: Vec<_> = (0..18).map(|_| session("p", "g", 600.0, 60.0, WindowedMode::Full)).collect();
        ss.push(session("p", "g", 299.0, 60.0, WindowedMode::Full));
        let out = filter_sessions(ss);
        assert_eq!(out.len(), 18);
        assert!(out.iter().all(|s| s.duration_s >= 300.0));
    }

    #[test]
    fn player_threshold_is_inclusive_at_18() {
        let few: Vec<_> = (0..17).map(|_| session("a", "g", 600.0, 60.0, WindowedMode::Full)).collect();
        assert!(filter_sessions(few).is_empty());
        let enough: Vec<_> = (0..18).map(|_| session("b", "g", 600.0, 60.0, WindowedMode::Full)).collect();
        assert_eq!(filter_sessions(enough).len(), 18);
    }

    #[test]
    fn duration_filter_runs_first() {
        // 18 sessions, but one is short: the player falls to 17 and is removed.
        let mut ss: Vec<_> = (0..17).map(|_| session("a", "g", 600.0, 60.0, WindowedMode::Full)).collect();
        ss.push(session("a", "g", 100.0, 60.0, WindowedMode::Full));
        assert!(filter_sessions(ss).is_empty());
    }

    #[test]
    fn merge_single_is_identity() {
        let s = session("p", "g", 600.0, 42.0, WindowedMode::Window);
        let pair = merge_to_pair(std::slice::from_ref(&s)).unwrap();
        assert_eq!(pair.histogram, s.histogram);
        assert_eq!(pair.avg_fps, 42.0);
        assert_eq!(pair.session_count, 1);
        assert_eq!(pair.features["session.duration_s"], RawValue::Numeric(Some(600.0)));
        assert_eq!(pair.features["session.windowed_mode"], RawValue::Categorical(Some("Window".into())));
    }

    #[test]
    fn merge_means_and_modes() {
        let ss = vec![
            session("p", "g", 600.0, 40.0, WindowedMode::Window),
            session("p", "g", 600.0, 60.0, WindowedMode::Full),
            session("p", "g", 600.0, 50.0, WindowedMode::Full),
        ];
        let pair = merge_to_pair(&ss[..2]).unwrap();
        assert_eq!(pair.avg_fps, 50.0);
        let pair = merge_to_pair(&ss).unwrap();
        assert_eq!(pair.features["session.windowed_mode"], RawValue::Categorical(Some("Full".into())));
        assert_eq!(pair.histogram.total(), 30);
    }

    #[test]
    fn mode_tie_breaks_lexicographically() {
        assert_eq!(mode(["Window", "Full"]), Some("Full".into()));
        assert_eq!(mode(["true", "false"]), Some("false".into()));
        assert_eq!(mode(Vec::<&str>::new()), None);
    }

    #[test]
    fn merge_errors() {
        assert!(merge_to_pair(&[]).is_err());
        let ss = vec![
            session("p", "g", 600.0, 40.0, WindowedMode::Window),
            session("q", "g", 600.0, 40.0, WindowedMode::Window),
        ];
        assert!(merge_to_pair(&ss).is_err());
    }

    #[test]
    fn unknown_game_mode_is_missing() {
        let mut s = session("p", "g", 600.0, 40.0, WindowedMode::Unknown);
        s.game_mode_on = None;
        let pair = merge_to_pair(&[s]).unwrap();
        assert_eq!(pair.features["session.game_mode_on"], RawValue::Categorical(None));
    }

    #[test]
    fn merge_all_groups_by_key() {
        let ss = vec![
            session("b", "g", 600.0, 40.0, WindowedMode::Window),
            session("a", "g", 600.0, 40.0, WindowedMode::Window),
            session("a", "g", 600.0, 40.0, WindowedMode::Window),
        ];
        let pairs = merge_all(&ss).unwrap();
        assert_eq!(pairs.len(), 2);
        assert_eq!(pairs[0].player_guid, "a");
        assert_eq!(pairs[0].session_count, 2);
    }

    #[test]
    fn session_json_shape() {
        let s = session("p", "g", 600.0, 40.0, WindowedMode::Full);
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        for key in ["player_guid", "game_id", "duration_s", "windowed_mode", "game_mode_on", "bins", "avg_fps"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["bins"].as_array().unwrap().len(), 42);
    }
}
