//! Orientation-invariant gait verification and identification from phone
//! accelerometer, gravity and orientation logs.
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the aliases below
//! fix the scalar for callers that do not care.

pub mod config;
pub mod earth;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod model;
pub mod num;
pub mod pipeline;
pub mod segmentation;
pub mod synth;

pub use config::{ChannelMode, PipelineConfig, Scheme};
pub use error::{GaitError, Result};
pub use num::Real;

pub type RawSession64 = ingest::RawSession<f64>;
pub type RawSession32 = ingest::RawSession<f32>;
pub type GaitSignal64 = earth::GaitSignal<f64>;
pub type GaitSignal32 = earth::GaitSignal<f32>;
pub type FeatureVector64 = features::FeatureVector<f64>;
pub type FeatureVector32 = features::FeatureVector<f32>;
pub type PcaModel64 = model::PcaModel<f64>;
pub type PcaModel32 = model::PcaModel<f32>;
pub type SvmModel64 = model::SvmModel<f64>;
pub type SvmModel32 = model::SvmModel<f32>;
pub type Gallery64 = model::Gallery<f64>;
pub type Gallery32 = model::Gallery<f32>;
