//! FPS telemetry data model: binning, class aggregation, session filtering
//! and player-game merging.

pub mod histogram;
pub mod io;
pub mod records;
pub mod session;

pub use histogram::{
    aggregate_to_classes, bin_index, bin_lower_edge, bin_upper_edge, class_of_bin, fps_floor_95, normalize,
    FpsHistogram42, CLASS_THRESHOLDS_HZ, NUM_BINS, NUM_CLASSES,
};
pub use records::{CountryRecord, GameRecord, PlayerRecord};
pub use session::{
    filter_sessions, merge_all, merge_to_pair, PlayerGamePair, SessionRecord, WindowedMode, MIN_SESSIONS_PER_PLAYER,
    MIN_SESSION_SECONDS,
};
