//! Session-level processing: raw log to feature vectors.

use log::warn;
use rayon::prelude::*;

use crate::config::{ChannelMode, PipelineConfig};
use crate::earth::{frames_to_earth, project_channels, remove_gravity, GaitSignal};
use crate::error::{GaitError, Result};
use crate::features::{extract_patterns, feature_vector, FeatureVector};
use crate::ingest::{align, wavelet_denoise, RawSession, Vec3};
use crate::num::{mean, Real};
use crate::segmentation::{segment_on, CycleStarts};

/// Everything one session produced, kept for diagnostics.
#[derive(Clone, Debug)]
pub struct SessionOutput<T> {
    pub subject_id: String,
    pub session_id: String,
    pub signal: GaitSignal<T>,
    pub starts: Option<CycleStarts>,
    pub vectors: Vec<FeatureVector<T>>,
    /// Why no patterns were produced, when that happens.
    pub warning: Option<String>,
}

impl<T> SessionOutput<T> {
    pub fn cycles(&self) -> usize {
        self.starts.as_ref().map_or(0, |s| s.indices.len().saturating_sub(1))
    }
}

fn denoise_axes<T: Real>(axes: &[Vec3<T>], levels: usize) -> Result<Vec<Vec3<T>>> {
    let mut cols: [Vec<T>; 3] = std::array::from_fn(|k| axes.iter().map(|v| v[k]).collect());
    for c in &mut cols {
        *c = wavelet_denoise(c, levels)?;
    }
    Ok((0..axes.len()).map(|i| [cols[0][i], cols[1][i], cols[2][i]]).collect())
}

/// Aligned, gravity-free, denoised (Z, XY, M) channels of a session.
pub fn gait_signal<T: Real>(session: &RawSession<T>, cfg: &PipelineConfig) -> Result<GaitSignal<T>> {
    let rate = T::lit(cfg.rate_hz);
    let frames = align(session, rate)?;
    let axes = match cfg.channels {
        ChannelMode::Earth => frames_to_earth(&frames)?,
        ChannelMode::Device | ChannelMode::Magnitude => remove_gravity(&frames).iter().map(|f| f.a).collect(),
    };
    let axes = denoise_axes(&axes, cfg.wavelet_levels)?;
    let mut signal = project_channels(&axes, rate);
    if cfg.channels == ChannelMode::Magnitude {
        signal.z.iter_mut().for_each(|v| *v = T::zero());
        signal.xy.iter_mut().for_each(|v| *v = T::zero());
    }
    Ok(signal)
}

/// Channel the cycle search runs on. In magnitude mode heel strikes are
/// maxima of M, so the centered magnitude is inverted.
fn detection_channel<T: Real>(signal: &GaitSignal<T>, mode: ChannelMode) -> Vec<T> {
    match mode {
        ChannelMode::Magnitude => {
            let mu = mean(&signal.m);
            signal.m.iter().map(|&v| mu - v).collect()
        }
        _ => signal.z.clone(),
    }
}

/// Runs one session through transform, denoising, segmentation and feature
/// extraction. Ingest problems are errors; a session that cannot be
/// segmented yields no vectors and a warning.
pub fn process_session<T: Real>(session: &RawSession<T>, cfg: &PipelineConfig) -> Result<SessionOutput<T>> {
    cfg.validate()?;
    let signal = gait_signal(session, cfg)?;
    let mut out = SessionOutput {
        subject_id: session.subject_id.clone(),
        session_id: session.session_id.clone(),
        signal,
        starts: None,
        vectors: Vec::new(),
        warning: None,
    };
    let channel = detection_channel(&out.signal, cfg.channels);
    let (starts, segments) = match segment_on(&out.signal, &channel, &cfg.segmentation()) {
        Ok(r) => r,
        Err(e) => {
            let msg = format!("session {}/{}: segmentation failed: {e}", session.subject_id, session.session_id);
            warn!("{msg}");
            out.warning = Some(msg);
            return Ok(out);
        }
    };
    out.starts = Some(starts);
    let patterns = extract_patterns(&segments, cfg.n_s);
    if patterns.is_empty() {
        let msg = format!(
            "session {}/{}: {} cycles is fewer than n_s = {}",
            session.subject_id,
            session.session_id,
            segments.len(),
            cfg.n_s
        );
        warn!("{msg}");
        out.warning = Some(msg);
    }
    let fcfg = cfg.features();
    for p in &patterns {
        match feature_vector(p, &fcfg, &session.subject_id, &session.session_id) {
            Ok(v) => out.vectors.push(v),
            Err(e) => warn!("session {}/{}: pattern skipped: {e}", session.subject_id, session.session_id),
        }
    }
    Ok(out)
}

/// Processes sessions in parallel; results keep the input order.
pub fn process_sessions<T: Real>(sessions: &[RawSession<T>], cfg: &PipelineConfig) -> Vec<Result<SessionOutput<T>>> {
    sessions.par_iter().map(|s| process_session(s, cfg)).collect()
}

/// Feature vectors of every session that processed, in session order.
pub fn feature_vectors<T: Real>(sessions: &[RawSession<T>], cfg: &PipelineConfig) -> Result<Vec<FeatureVector<T>>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (s, r) in sessions.iter().zip(process_sessions(sessions, cfg)) {
        match r {
            Ok(o) => out.extend(o.vectors),
            Err(e) if e.is_data_error() => warn!("session {}/{} skipped: {e}", s.subject_id, s.session_id),
            Err(e) => return Err(e),
        }
    }
    if out.is_empty() {
        return Err(GaitError::Empty);
    }
    Ok(out)
}
