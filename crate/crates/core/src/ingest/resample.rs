use log::warn;

use super::{RawSession, SensorKind, Vec3};
use crate::error::{GaitError, Result};
use crate::num::Real;

/// Capture rate of the reference hardware.
pub const DEFAULT_RATE_HZ: f64 = 27.0;

/// One synchronized (accel, gravity, orientation) triplet.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignedFrame<T> {
    pub t: T,
    pub a: Vec3<T>,
    pub g: Vec3<T>,
    /// Orientation angles (α, β, γ) in degrees.
    pub o: Vec3<T>,
}

fn check_rate<T: Real>(rate_hz: T) -> Result<T> {
    if !(rate_hz.is_finite() && rate_hz > T::zero()) {
        return Err(GaitError::InvalidConfig(format!("rate_hz must be positive, got {rate_hz}")));
    }
    Ok(T::lit(1000.0) / rate_hz)
}

/// Collapses duplicate timestamps, keeping the last sample.
fn dedup_last<T: Real>(series: &[(T, Vec3<T>)]) -> Vec<(T, Vec3<T>)> {
    let mut out: Vec<(T, Vec3<T>)> = Vec::with_capacity(series.len());
    let mut dropped = 0usize;
    for &(t, v) in series {
        match out.last_mut() {
            Some(last) if last.0 == t => {
                if last.1 != v {
                    dropped += 1;
                }
                last.1 = v;
            }
            _ => out.push((t, v)),
        }
    }
    if dropped > 0 {
        warn!("{dropped} duplicate timestamp(s) with differing values; kept the last sample");
    }
    out
}

/// Cursor-based linear interpolation over a sorted, duplicate-free series.
struct Interpolator<'a, T> {
    series: &'a [(T, Vec3<T>)],
    cursor: usize,
    angular: bool,
}

impl<'a, T: Real> Interpolator<'a, T> {
    fn new(series: &'a [(T, Vec3<T>)], angular: bool) -> Self {
        Interpolator {
            series,
            cursor: 0,
            angular,
        }
    }

    /// Value at `t`; queries must be non-decreasing and inside the support
    /// (values outside are clamped to the end samples).
    fn at(&mut self, t: T) -> Vec3<T> {
        let s = self.series;
        while self.cursor + 1 < s.len() && s[self.cursor + 1].0 <= t {
            self.cursor += 1;
        }
        let (t0, v0) = s[self.cursor];
        if t <= t0 || self.cursor + 1 == s.len() {
            return v0;
        }
        let (t1, v1) = s[self.cursor + 1];
        let f = (t - t0) / (t1 - t0);
        std::array::from_fn(|i| {
            let mut d = v1[i] - v0[i];
            if self.angular {
                d = wrap_degrees(d);
            }
            v0[i] + f * d
        })
    }
}

/// Wraps an angle difference into [-180, 180).
fn wrap_degrees<T: Real>(d: T) -> T {
    let full = T::lit(360.0);
    let half = T::lit(180.0);
    d - full * ((d + half) / full).floor()
}

/// Linearly interpolates a time-sorted series at non-decreasing query times.
/// Queries outside the support take the nearest end sample.
pub fn interpolate_at<T: Real>(series: &[(T, Vec3<T>)], times: &[T]) -> Vec<Vec3<T>> {
    if series.is_empty() {
        return Vec::new();
    }
    let series = dedup_last(series);
    let mut interp = Interpolator::new(&series, false);
    times.iter().map(|&t| interp.at(t)).collect()
}

/// Resamples a time-sorted series onto the grid `t₀ + i·1000/rate_hz` ms,
/// interpolating each component linearly between its bracketing samples.
pub fn resample<T: Real>(series: &[(T, Vec3<T>)], rate_hz: T) -> Result<Vec<(T, Vec3<T>)>> {
    let dt = check_rate(rate_hz)?;
    if series.len() < 2 {
        return Err(GaitError::TooShort {
            what: "resample input",
            need: 2,
            got: series.len(),
        });
    }
    let series = dedup_last(series);
    if series.len() < 2 {
        return Err(GaitError::TooShort {
            what: "resample input (distinct timestamps)",
            need: 2,
            got: series.len(),
        });
    }
    let t0 = series[0].0;
    let span = series[series.len() - 1].0 - t0;
    let steps = (span / dt + T::lit(1e-9)).floor().to_usize().unwrap_or(0);

    let mut interp = Interpolator::new(&series, false);
    Ok((0..=steps)
        .map(|i| {
            let t = t0 + T::from_usize_lossy(i) * dt;
            (t, interp.at(t))
        })
        .collect())
}

/// Resamples the accelerometer stream and interpolates gravity and
/// orientation at the accelerometer timestamps. Frames outside the time
/// range covered by all three streams are dropped.
///
/// Orientation is interpolated along the shorter arc, so a heading that
/// wraps from 359° to 1° passes through 0° rather than 180°.
pub fn align<T: Real>(session: &RawSession<T>, rate_hz: T) -> Result<Vec<AlignedFrame<T>>> {
    let accel = resample(&session.stream(SensorKind::Accel), rate_hz)?;
    let gravity = dedup_last(&session.stream(SensorKind::Gravity));
    let orient = dedup_last(&session.stream(SensorKind::Orientation));

    let start = gravity[0].0.max(orient[0].0);
    let end = gravity[gravity.len() - 1].0.min(orient[orient.len() - 1].0);

    let mut g_at = Interpolator::new(&gravity, false);
    let mut o_at = Interpolator::new(&orient, true);
    let frames: Vec<AlignedFrame<T>> = accel
        .into_iter()
        .filter(|(t, _)| *t >= start && *t <= end)
        .map(|(t, a)| AlignedFrame {
            t,
            a,
            g: g_at.at(t),
            o: o_at.at(t),
        })
        .collect();
    if frames.is_empty() {
        return Err(GaitError::EmptyOverlap);
    }
    Ok(frames)
}
