//! Binary restricted Boltzmann machines trained by stochastic
//! difference-of-convex programming (S-DCP), its centered variant, and the
//! contrastive-divergence family, with exact and AIS likelihood evaluation.
//!
//! The visible layer has `m` units and the hidden layer `n`; weights are
//! stored `n × m`.

pub mod centering;
pub mod data;
pub mod error;
pub mod evaluator;
pub mod math;
pub mod model;
pub mod oracle;
pub mod rng;
pub mod sampler;
pub mod trainers;

pub use centering::CenteringState;
pub use data::BinaryDataset;
pub use error::{Error, Result};
pub use evaluator::{AisBase, AisConfig, AtllKind, EvalSettings, EvaluationRecord, LogZEstimate};
pub use model::{BinaryPattern, GradientRecord, ModelDims, RbmParams, DEFAULT_ENUMERATION_CAP};
pub use rng::RngStream;
pub use trainers::{Algorithm, TrainConfig, TrainingRun};
