//! Disorientation A/B: the same sessions evaluated with device-axis,
//! Earth-frame and magnitude-only channels.

use serde::Serialize;

use super::protocol::{evaluate, Evaluation};
use crate::config::{ChannelMode, PipelineConfig};
use crate::error::Result;
use crate::ingest::RawSession;
use crate::num::Real;
use crate::pipeline::feature_vectors;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbReport {
    pub device: Evaluation,
    pub earth: Evaluation,
    pub magnitude: Evaluation,
}

impl AbReport {
    /// Earth-frame pattern EER below the device-axis one.
    pub fn earth_beats_device(&self) -> bool {
        self.earth.pattern.eer < self.device.pattern.eer
    }
}

pub fn evaluate_mode<T: Real>(sessions: &[RawSession<T>], cfg: &PipelineConfig, mode: ChannelMode) -> Result<Evaluation> {
    let cfg = PipelineConfig { channels: mode, ..cfg.clone() };
    evaluate(&feature_vectors(sessions, &cfg)?, &cfg)
}

pub fn disorientation_ab<T: Real>(sessions: &[RawSession<T>], cfg: &PipelineConfig) -> Result<AbReport> {
    Ok(AbReport {
        device: evaluate_mode(sessions, cfg, ChannelMode::Device)?,
        earth: evaluate_mode(sessions, cfg, ChannelMode::Earth)?,
        magnitude: evaluate_mode(sessions, cfg, ChannelMode::Magnitude)?,
    })
}
