//! Cold-start gating between the four forward paths.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Path {
    /// No kernel.
    Wo,
    /// Player kernel only.
    Wp,
    /// Game kernel only.
    Wg,
    /// Both kernels.
    Wb,
}

impl Path {
    pub const ALL: [Path; 4] = [Path::Wo, Path::Wp, Path::Wg, Path::Wb];

    pub fn as_str(self) -> &'static str {
        match self {
            Path::Wo => "wo",
            Path::Wp => "wp",
            Path::Wg => "wg",
            Path::Wb => "wb",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Path {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "wo" => Ok(Path::Wo),
            "wp" => Ok(Path::Wp),
            "wg" => Ok(Path::Wg),
            "wb" => Ok(Path::Wb),
            other => Err(Error::InvalidInput(format!("unknown path {other:?}; expected wo|wp|wg|wb"))),
        }
    }
}

/// Picks the path from the two record counts; thresholds are inclusive.
pub fn select_path(player_records: u64, game_records: u64, player_min: u64, game_min: u64) -> Path {
    match (player_records >= player_min, game_records >= game_min) {
        (true, true) => Path::Wb,
        (true, false) => Path::Wp,
        (false, true) => Path::Wg,
        (false, false) => Path::Wo,
    }
}

/// Trained-record counters per player and per game.
///
/// A record is one distinct (player, game) training pair: seeing the same
/// pair again in a later epoch or round does not count twice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GatePolicy {
    pub player_min_records: u64,
    pub game_min_records: u64,
    pub player_counts: BTreeMap<String, u64>,
    pub game_counts: BTreeMap<String, u64>,
    #[serde(skip)]
    seen: BTreeSet<(String, String)>,
}

impl Default for GatePolicy {
    fn default() -> Self {
        Self::new(3, 10)
    }
}

impl GatePolicy {
    pub fn new(player_min_records: u64, game_min_records: u64) -> Self {
        Self {
            player_min_records,
            game_min_records,
            player_counts: BTreeMap::new(),
            game_counts: BTreeMap::new(),
            seen: BTreeSet::new(),
        }
    }

    /// Notes that the pair was trained on. Returns false if it was already
    /// counted.
    pub fn record(&mut self, player: &str, game: &str) -> bool {
        if !self.seen.insert((player.to_owned(), game.to_owned())) {
            return false;
        }
        *self.player_counts.entry(player.to_owned()).or_default() += 1;
        *self.game_counts.entry(game.to_owned()).or_default() += 1;
        true
    }

    pub fn player_count(&self, player: &str) -> u64 {
        self.player_counts.get(player).copied().unwrap_or(0)
    }

    pub fn game_count(&self, game: &str) -> u64 {
        self.game_counts.get(game).copied().unwrap_or(0)
    }

    pub fn path_for(&self, player: &str, game: &str) -> Path {
        select_path(self.player_count(player), self.game_count(game), self.player_min_records, self.game_min_records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn threshold_examples() {
        assert_eq!(select_path(2, 15, 3, 10), Path::Wg);
        assert_eq!(select_path(3, 10, 3, 10), Path::Wb);
        assert_eq!(select_path(3, 9, 3, 10), Path::Wp);
        let g = GatePolicy::default();
        assert_eq!(g.path_for("new-player", "new-game"), Path::Wo);
    }

    #[test]
    fn repeated_pairs_count_once() {
        let mut g = GatePolicy::default();
        assert!(g.record("p", "a"));
        assert!(!g.record("p", "a"));
        g.record("p", "b");
        g.record("q", "a");
        assert_eq!(g.player_count("p"), 2);
        assert_eq!(g.game_count("a"), 2);
    }

    #[test]
    fn path_parses() {
        for p in Path::ALL {
            assert_eq!(p.as_str().parse::<Path>().unwrap(), p);
        }
        assert!("both".parse::<Path>().is_err());
    }

    proptest! {
        #[test]
        fn path_is_pure_function_of_counters(pc in 0u64..20, gc in 0u64..40, pm in 0u64..10, gm in 0u64..20) {
            let p = select_path(pc, gc, pm, gm);
            prop_assert_eq!(matches!(p, Path::Wp | Path::Wb), pc >= pm);
            prop_assert_eq!(matches!(p, Path::Wg | Path::Wb), gc >= gm);
            prop_assert_eq!(p, select_path(pc, gc, pm, gm));
        }
    }
}
