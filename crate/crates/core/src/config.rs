//! Pipeline parameters and their `key=value` text form.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{GaitError, Result};
use crate::features::FeatureConfig;
use crate::segmentation::SegmentationConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Knn,
    Svm,
}

impl FromStr for Scheme {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "knn" => Ok(Scheme::Knn),
            "svm" => Ok(Scheme::Svm),
            other => Err(format!("unknown scheme '{other}' (expected knn or svm)")),
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Knn => "knn",
            Scheme::Svm => "svm",
        })
    }
}

/// How the three gait channels are derived from the aligned sensor frames.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// Gravity removed, rotated into the Earth frame.
    Earth,
    /// Gravity removed, raw device axes used as if they were Earth axes.
    Device,
    /// Only the orientation-free magnitude; Z and XY are zeroed.
    Magnitude,
}

impl FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "earth" => Ok(ChannelMode::Earth),
            "device" => Ok(ChannelMode::Device),
            "magnitude" => Ok(ChannelMode::Magnitude),
            other => Err(format!("unknown channel mode '{other}' (expected earth, device or magnitude)")),
        }
    }
}

impl fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelMode::Earth => "earth",
            ChannelMode::Device => "device",
            ChannelMode::Magnitude => "magnitude",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub rate_hz: f64,
    pub wavelet_levels: usize,
    pub tau: f64,
    pub epsilon_fraction: f64,
    pub smoothing_window: usize,
    pub min_lag_s: f64,
    pub min_prominence: f64,
    pub n_s: usize,
    pub freq_bin_offset: usize,
    pub pca_variance: f64,
    pub svm_c: f64,
    pub train_fraction: f64,
    pub seed: u64,
    pub scheme: Scheme,
    pub channels: ChannelMode,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let seg = SegmentationConfig::default();
        PipelineConfig {
            rate_hz: 27.0,
            wavelet_levels: 2,
            tau: seg.tau,
            epsilon_fraction: seg.epsilon_fraction,
            smoothing_window: seg.smoothing_window,
            min_lag_s: seg.min_lag_s,
            min_prominence: seg.min_prominence,
            n_s: 4,
            freq_bin_offset: 0,
            pca_variance: 0.995,
            svm_c: 1.0,
            train_fraction: 0.5,
            seed: 7,
            scheme: Scheme::Svm,
            channels: ChannelMode::Earth,
        }
    }
}

pub const KEYS: [&str; 15] = [
    "rate_hz",
    "wavelet_levels",
    "tau",
    "epsilon_fraction",
    "smoothing_window",
    "min_lag_s",
    "min_prominence",
    "n_s",
    "freq_bin_offset",
    "pca_variance",
    "svm_c",
    "train_fraction",
    "seed",
    "scheme",
    "channels",
];

fn parse<V: FromStr>(key: &str, value: &str) -> Result<V> {
    value
        .parse()
        .map_err(|_| GaitError::InvalidConfig(format!("invalid value '{value}' for {key}")))
}

impl PipelineConfig {
    pub fn segmentation(&self) -> SegmentationConfig {
        SegmentationConfig {
            tau: self.tau,
            epsilon_fraction: self.epsilon_fraction,
            smoothing_window: self.smoothing_window,
            min_lag_s: self.min_lag_s,
            min_prominence: self.min_prominence,
        }
    }

    pub fn features(&self) -> FeatureConfig {
        FeatureConfig {
            freq_bin_offset: self.freq_bin_offset,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(GaitError::InvalidConfig(msg));
        if !(self.rate_hz > 0.0 && self.rate_hz.is_finite()) {
            return fail(format!("rate_hz must be positive, got {}", self.rate_hz));
        }
        if self.wavelet_levels == 0 {
            return fail("wavelet_levels must be >= 1".into());
        }
        if self.n_s < 2 || !self.n_s.is_multiple_of(2) {
            return fail(format!("n_s must be even and >= 2, got {}", self.n_s));
        }
        if !(self.pca_variance > 0.0 && self.pca_variance <= 1.0) {
            return fail(format!("pca_variance must be in (0, 1], got {}", self.pca_variance));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction must be in (0, 1), got {}", self.train_fraction));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return fail(format!("svm_c must be positive, got {}", self.svm_c));
        }
        if !(self.tau.is_finite() && self.epsilon_fraction >= 0.0 && self.min_lag_s >= 0.0) {
            return fail("segmentation parameters out of range".into());
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "rate_hz" => self.rate_hz.to_string(),
            "wavelet_levels" => self.wavelet_levels.to_string(),
            "tau" => self.tau.to_string(),
            "epsilon_fraction" => self.epsilon_fraction.to_string(),
            "smoothing_window" => self.smoothing_window.to_string(),
            "min_lag_s" => self.min_lag_s.to_string(),
            "min_prominence" => self.min_prominence.to_string(),
            "n_s" => self.n_s.to_string(),
            "freq_bin_offset" => self.freq_bin_offset.to_string(),
            "pca_variance" => self.pca_variance.to_string(),
            "svm_c" => self.svm_c.to_string(),
            "train_fraction" => self.train_fraction.to_string(),
            "seed" => self.seed.to_string(),
            "scheme" => self.scheme.to_string(),
            "channels" => self.channels.to_string(),
            _ => return None,
        })
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let v = value.trim();
        match key.trim() {
            "rate_hz" => self.rate_hz = parse(key, v)?,
            "wavelet_levels" => self.wavelet_levels = parse(key, v)?,
            "tau" => self.tau = parse(key, v)?,
            "epsilon_fraction" => self.epsilon_fraction = parse(key, v)?,
            "smoothing_window" => self.smoothing_window = parse(key, v)?,
            "min_lag_s" => self.min_lag_s = parse(key, v)?,
            "min_prominence" => self.min_prominence = parse(key, v)?,
            "n_s" => self.n_s = parse(key, v)?,
            "freq_bin_offset" => self.freq_bin_offset = parse(key, v)?,
            "pca_variance" => self.pca_variance = parse(key, v)?,
            "svm_c" => self.svm_c = parse(key, v)?,
            "train_fraction" => self.train_fraction = parse(key, v)?,
            "seed" => self.seed = parse(key, v)?,
            "scheme" => self.scheme = v.parse().map_err(GaitError::InvalidConfig)?,
            "channels" => self.channels = v.parse().map_err(GaitError::InvalidConfig)?,
            other => return Err(GaitError::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| GaitError::InvalidConfig(format!("line {}: expected key=value", n + 1)))?;
            self.set(k, v)
                .map_err(|e| GaitError::InvalidConfig(format!("line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = PipelineConfig::default();
        c.apply_text(text)?;
        Ok(c)
    }

    /// Every key in fixed order, one `key=value` per line.
    pub fn to_text(&self) -> String {
        KEYS.iter()
            .map(|k| format!("{k}={}\n", self.get(k).expect("known key")))
            .collect()
    }

    /// SHA-256 of [`to_text`](Self::to_text), lowercase hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_text().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
