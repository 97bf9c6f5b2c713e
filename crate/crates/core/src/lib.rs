//! Replay-attack detection countermeasure toolkit.
//!
//! The pipeline runs audio through a fixed-length buffer, extracts one of three
//! spectro-temporal features, trains a thin pre-activation ResNet (optionally as
//! a Siamese pair with a reconstruction decoder) and evaluates trial scores by
//! equal error rate, with logistic-regression fusion across subsystems.
//!
//! All numerical code is generic over [`Real`] (`f32` or `f64`). The training
//! pipeline runs in `f32`; gradient checks use `f64`. The aliases at the bottom of
//! this file name the concrete instantiations the CLI uses.

pub mod dataset;
pub mod dsp;
pub mod error;
pub mod formats;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod scalar;
pub mod training;

pub use dataset::{Label, Subset, UtteranceRecord};
pub use dsp::{AudioBuffer, FeatureKind, FeatureMatrix, GdConfig, StftConfig};
pub use error::{Error, Result};
pub use metrics::TrialScore;
pub use model::{Model, ModelSpec, Pooling};
pub use scalar::Real;
pub use losses::{LossMode, LossWeights};
pub use training::{ExperimentConfig, TrainConfig};

/// Sample rate of every audio file the pipeline accepts.
pub const SAMPLE_RATE: u32 = 16_000;

pub type AudioBufferF32 = AudioBuffer<f32>;
pub type AudioBufferF64 = AudioBuffer<f64>;
pub type FeatureMatrixF32 = FeatureMatrix<f32>;
pub type FeatureMatrixF64 = FeatureMatrix<f64>;
pub type ModelF32 = Model<f32>;
pub type ModelF64 = Model<f64>;
