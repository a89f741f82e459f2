//! FPS-distribution prediction from gaming telemetry: data model,
//! preprocessing, a knowledge-kernel predictor with cold-start gating,
//! simulated federated training, metrics and statistics.

pub mod baselines;
pub mod checkpoint;
pub mod dataset;
pub mod distribution;
pub mod error;
pub mod features;
pub mod fedsim;
pub mod insights;
pub mod lkk;
pub mod metrics;
pub mod nn;
pub mod pipeline;
pub mod rng;
pub mod run;
pub mod scalar;
pub mod special;
pub mod synthgen;
pub mod telemetry;
pub mod train;

pub use distribution::ClassDistribution;
pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LkkModel64 = lkk::LkkModel<f64>;
pub type LkkModel32 = lkk::LkkModel<f32>;
pub type ClassDistribution64 = ClassDistribution<f64>;
pub type ClassDistribution32 = ClassDistribution<f32>;
pub type EncodedPair64 = dataset::EncodedPair<f64>;
pub type EncodedPair32 = dataset::EncodedPair<f32>;
pub type ParamStore64 = nn::ParamStore<f64>;
pub type ParamStore32 = nn::ParamStore<f32>;
pub type SoftmaxRegressor64 = baselines::SoftmaxRegressor<f64>;
pub type SoftmaxRegressor32 = baselines::SoftmaxRegressor<f32>;
