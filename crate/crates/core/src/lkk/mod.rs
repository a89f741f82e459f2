//! Player/game knowledge-kernel predictor.

pub mod gate;
pub mod gradcheck;
pub mod model;

pub use gate::{select_path, GatePolicy, Path};
pub use model::{four_case_loss, ArchConfig, IdTable, LkkModel, PathOutputs, GRAD_CHUNK};
pub use gradcheck::{check_lkk_gradients, GradCheckConfig};
