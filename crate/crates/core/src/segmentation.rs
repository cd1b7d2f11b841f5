//! Gait-cycle segmentation of the vertical channel.
//!
//! The cycle length Δ comes from the autocorrelation of the Z channel: the
//! first autocorrelation peak is a single step, the second a full two-step
//! cycle. Cycle starts are the heel-strike minima that are both deep (below
//! `μ − τσ` of all minima) and followed by another minimum roughly Δ later.

use std::io::Write;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::earth::GaitSignal;
use crate::error::{GaitError, Result};
use crate::num::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SegmentationConfig {
    /// Multiplier on the peak standard deviation in the depth threshold.
    pub tau: f64,
    /// Position tolerance as a fraction of Δ; ε = round(fraction·Δ).
    pub epsilon_fraction: f64,
    /// Centered moving-average window applied to the autocorrelation.
    pub smoothing_window: usize,
    /// Shortest lag considered when looking for autocorrelation peaks.
    pub min_lag_s: f64,
    /// Rise above the preceding trough an autocorrelation maximum needs to
    /// count as a peak.
    pub min_prominence: f64,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        SegmentationConfig {
            tau: 1.0,
            epsilon_fraction: 0.3,
            smoothing_window: 5,
            min_lag_s: 0.25,
            min_prominence: 0.05,
        }
    }
}

impl SegmentationConfig {
    pub fn min_lag(&self, rate_hz: f64) -> usize {
        ((self.min_lag_s * rate_hz).round() as usize).max(1)
    }

    pub fn epsilon(&self, cycle_len: usize) -> usize {
        (self.epsilon_fraction * cycle_len as f64).round() as usize
    }
}

/// Strict local minima of the vertical channel, in index order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeakSet {
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CycleStarts {
    pub indices: Vec<usize>,
    /// Estimated cycle length Δ in samples.
    pub cycle_len: usize,
}

/// One gait cycle on all three channels, both boundary samples included.
#[derive(Clone, Debug, PartialEq)]
pub struct CycleSegment<T> {
    pub z: Vec<T>,
    pub xy: Vec<T>,
    pub m: Vec<T>,
    pub start_index: usize,
}

impl<T> CycleSegment<T> {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
}

/// Bias-corrected autocorrelation coefficients
/// `c_t = N/(N−t) · Σ z_i z_{i+t} / Σ z_i²` for `0 ≤ t < N`, via FFT.
pub fn autocorr<T: Real>(z: &[T]) -> Result<Vec<T>> {
    let n = z.len();
    if n < 2 {
        return Err(GaitError::TooShort {
            what: "autocorrelation input",
            need: 2,
            got: n,
        });
    }
    let energy: T = z.iter().map(|&v| v * v).sum();
    if energy <= T::zero() {
        return Err(GaitError::NoSignalEnergy);
    }

    let size = (2 * n).next_power_of_two();
    let mut planner = FftPlanner::<T>::new();
    let forward = planner.plan_fft_forward(size);
    let inverse = planner.plan_fft_inverse(size);
    let mut buf: Vec<Complex<T>> = z
        .iter()
        .map(|&v| Complex::new(v, T::zero()))
        .chain(std::iter::repeat(Complex::new(T::zero(), T::zero())))
        .take(size)
        .collect();
    forward.process(&mut buf);
    for c in &mut buf {
        *c = Complex::new(c.norm_sqr(), T::zero());
    }
    inverse.process(&mut buf);

    let nf = T::from_usize_lossy(n);
    let scale = T::from_usize_lossy(size);
    Ok((0..n)
        .map(|t| {
            let lagged = buf[t].re / scale;
            nf / T::from_usize_lossy(n - t) * lagged / energy
        })
        .collect())
}

fn moving_average<T: Real>(x: &[T], window: usize) -> Vec<T> {
    let half = window / 2;
    (0..x.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(x.len() - 1);
            x[lo..=hi].iter().copied().sum::<T>() / T::from_usize_lossy(hi - lo + 1)
        })
        .collect()
}

/// Cycle length Δ in samples: the lag of the second prominent maximum of
/// the smoothed autocorrelation.
///
/// For a pure sinusoid there is no half-period peak, so the second maximum
/// lands at twice the period.
pub fn estimate_cycle_length<T: Real>(c: &[T], rate_hz: T, cfg: &SegmentationConfig) -> Result<usize> {
    let smooth = moving_average(c, cfg.smoothing_window.max(1));
    let min_lag = cfg.min_lag(rate_hz.as_f64());
    let prominence = T::lit(cfg.min_prominence);
    // Lags beyond N/2 average over too few products to be trusted.
    let max_lag = c.len() / 2;

    let mut found = Vec::with_capacity(2);
    let mut trough = T::infinity();
    for t in min_lag.max(1)..max_lag.min(smooth.len().saturating_sub(1)) {
        trough = trough.min(smooth[t]);
        let is_max = smooth[t] > smooth[t - 1] && smooth[t] >= smooth[t + 1];
        if is_max && smooth[t] - trough >= prominence {
            found.push(t);
            if found.len() == 2 {
                return Ok(t);
            }
            trough = smooth[t];
        }
    }
    Err(GaitError::Aperiodic)
}

/// Indices of strict local minima, order preserved.
pub fn find_negative_peaks<T: Real>(z: &[T]) -> Result<PeakSet> {
    if z.len() < 3 {
        return Err(GaitError::TooShort {
            what: "peak search input",
            need: 3,
            got: z.len(),
        });
    }
    let indices: Vec<usize> = (1..z.len() - 1)
        .filter(|&i| z[i - 1] > z[i] && z[i + 1] > z[i])
        .collect();
    if indices.len() <= 1 {
        return Err(GaitError::TooFewPeaks(indices.len()));
    }
    Ok(PeakSet { indices })
}

/// Depth threshold `δ = μ − τσ` over the peak values, σ with `n − 1`
/// normalization (zero for a single peak).
pub fn magnitude_threshold<T: Real>(z: &[T], peaks: &PeakSet, tau: T) -> T {
    let values: Vec<T> = peaks.indices.iter().map(|&i| z[i]).collect();
    let n = values.len();
    if n == 0 {
        return T::neg_infinity();
    }
    let mu = values.iter().copied().sum::<T>() / T::from_usize_lossy(n);
    let sigma = if n > 1 {
        (values.iter().map(|&v| (v - mu) * (v - mu)).sum::<T>() / T::from_usize_lossy(n - 1)).sqrt()
    } else {
        T::zero()
    };
    mu - tau * sigma
}

/// Peaks in `[from + Δ − ε, from + Δ + ε]`, as positions into `peaks`.
fn in_window(peaks: &[usize], from: usize, delta: usize, eps: usize) -> std::ops::Range<usize> {
    let lo = (from + delta).saturating_sub(eps).max(from + 1);
    let hi = from + delta + eps;
    let a = peaks.partition_point(|&p| p < lo);
    let b = peaks.partition_point(|&p| p <= hi);
    a..b.max(a)
}

/// Peaks in `[from − Δ − ε, from − Δ + ε]`, as positions into `peaks`.
fn in_window_before(peaks: &[usize], from: usize, delta: usize, eps: usize) -> std::ops::Range<usize> {
    let Some(hi) = (from + eps).checked_sub(delta) else {
        return 0..0;
    };
    let hi = hi.min(from.saturating_sub(1));
    let lo = from.saturating_sub(delta + eps);
    let a = peaks.partition_point(|&p| p < lo);
    let b = peaks.partition_point(|&p| p <= hi);
    a..b.max(a)
}

fn closest_to(peaks: &[usize], candidates: impl Iterator<Item = usize>, target: usize) -> Option<usize> {
    candidates.min_by_key(|&k| (peaks[k].abs_diff(target), peaks[k]))
}

/// Selects the cycle starting points among the negative peaks.
///
/// A peak qualifies as a start when it lies below the depth threshold and
/// another peak follows it within `[Δ − ε, Δ + ε]` samples. Chains are
/// seeded at qualifying peaks and grown by taking, inside the window after
/// the current start, the peak closest to `previous + Δ`, preferring
/// qualifying peaks, then deep ones, then any. The successor does not have
/// to be deep itself. A chain ends at a peak with nothing in its window,
/// and is then grown backwards from its first peak by the mirrored rule.
/// The longest chain wins, ties going to the deeper and then the earlier
/// one, so consecutive starts are always `Δ ± ε` apart.
pub fn select_cycle_starts<T: Real>(
    z: &[T],
    peaks: &PeakSet,
    cycle_len: usize,
    tau: T,
    epsilon: usize,
) -> Result<CycleStarts> {
    if cycle_len == 0 {
        return Err(GaitError::InvalidConfig("cycle length must be positive".into()));
    }
    let idx = &peaks.indices;
    let delta = magnitude_threshold(z, peaks, tau);
    let deep: Vec<bool> = idx.iter().map(|&i| z[i] < delta).collect();
    let qualifies: Vec<bool> = (0..idx.len())
        .map(|j| deep[j] && !in_window(idx, idx[j], cycle_len, epsilon).is_empty())
        .collect();

    let mut covered = vec![false; idx.len()];
    let mut best: Option<(Vec<usize>, T)> = None;
    for start in (0..idx.len()).filter(|&j| qualifies[j]) {
        if covered[start] {
            continue;
        }
        let pick = |window: std::ops::Range<usize>, target: usize| {
            closest_to(idx, window.clone().filter(|&k| qualifies[k]), target)
                .or_else(|| closest_to(idx, window.clone().filter(|&k| deep[k]), target))
                .or_else(|| closest_to(idx, window, target))
        };
        let mut chain = vec![start];
        loop {
            let cur = *chain.last().expect("non-empty chain");
            let Some(next) = pick(in_window(idx, idx[cur], cycle_len, epsilon), idx[cur] + cycle_len) else {
                break;
            };
            covered[next] = true;
            chain.push(next);
        }
        // The same rule run backwards recovers early starts that missed
        // the depth cut.
        loop {
            let first = idx[chain[0]];
            let window = in_window_before(idx, first, cycle_len, epsilon);
            let Some(prev) = pick(window, first.saturating_sub(cycle_len)) else {
                break;
            };
            covered[prev] = true;
            chain.insert(0, prev);
        }
        let depth = chain[..chain.len() - 1].iter().map(|&k| z[idx[k]]).sum::<T>()
            / T::from_usize_lossy(chain.len() - 1);
        let better = match &best {
            None => true,
            Some((b, d)) => chain.len() > b.len() || (chain.len() == b.len() && depth < *d),
        };
        if better {
            best = Some((chain, depth));
        }
    }

    match best {
        Some((chain, _)) if chain.len() >= 2 => Ok(CycleStarts {
            indices: chain.into_iter().map(|k| idx[k]).collect(),
            cycle_len,
        }),
        _ => Err(GaitError::NoCompleteCycle),
    }
}

/// Splits all channels into the `k − 1` cycles between consecutive starts.
pub fn split_cycles<T: Real>(signal: &GaitSignal<T>, starts: &CycleStarts) -> Vec<CycleSegment<T>> {
    starts
        .indices
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            CycleSegment {
                z: signal.z[a..=b].to_vec(),
                xy: signal.xy[a..=b].to_vec(),
                m: signal.m[a..=b].to_vec(),
                start_index: a,
            }
        })
        .collect()
}

/// Full segmentation of a gait signal, detecting cycles on `channel`
/// (normally the signal's own Z channel).
pub fn segment_on<T: Real>(
    signal: &GaitSignal<T>,
    channel: &[T],
    cfg: &SegmentationConfig,
) -> Result<(CycleStarts, Vec<CycleSegment<T>>)> {
    let c = autocorr(channel)?;
    let cycle_len = estimate_cycle_length(&c, signal.rate_hz, cfg)?;
    let peaks = find_negative_peaks(channel)?;
    let starts = select_cycle_starts(
        channel,
        &peaks,
        cycle_len,
        T::lit(cfg.tau),
        cfg.epsilon(cycle_len),
    )?;
    let segments = split_cycles(signal, &starts);
    Ok((starts, segments))
}

pub fn segment<T: Real>(
    signal: &GaitSignal<T>,
    cfg: &SegmentationConfig,
) -> Result<(CycleStarts, Vec<CycleSegment<T>>)> {
    segment_on(signal, &signal.z, cfg)
}

/// Debug dump of detected starts as CSV `index,t_ms,z_value`.
pub fn write_starts_csv<T: Real, W: Write>(starts: &CycleStarts, signal: &GaitSignal<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["index", "t_ms", "z_value"])?;
    let dt = T::lit(1000.0) / signal.rate_hz;
    for &i in &starts.indices {
        w.write_record([
            i.to_string(),
            (T::from_usize_lossy(i) * dt).to_string(),
            signal.z[i].to_string(),
        ])?;
    }
    w.flush().map_err(|e| GaitError::io("<starts writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Eq.-literal double loop, kept independent of the FFT path.
    fn autocorr_oracle(z: &[f64]) -> Vec<f64> {
        let n = z.len();
        let e: f64 = z.iter().map(|v| v * v).sum();
        (0..n)
            .map(|t| {
                let s: f64 = (0..n - t).map(|i| z[i] * z[i + t]).sum();
                n as f64 / (n - t) as f64 * s / e
            })
            .collect()
    }

    fn lcg_noise(seed: u64, n: usize) -> Vec<f64> {
        let mut s = seed;
        (0..n)
            .map(|_| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect()
    }

    #[test]
    fn autocorr_matches_double_loop() {
        let z: Vec<f64> = (0..300).map(|i| (i as f64 * 0.37).sin() + 0.2 * (i as f64 * 1.3).cos()).collect();
        let fast = autocorr(&z).unwrap();
        let slow = autocorr_oracle(&z);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).abs() < 1e-9 * b.abs().max(1.0), "{a} vs {b}");
        }
        assert!((fast[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn autocorr_of_sinusoid_peaks_at_period() {
        let period = 20;
        let z: Vec<f64> = (0..400).map(|i| (2.0 * PI * i as f64 / period as f64).sin()).collect();
        let c = autocorr_oracle(&z);
        assert!(c[period] > c[period - 1] && c[period] > c[period + 1]);
        let fast = autocorr(&z).unwrap();
        assert!(fast[period] > fast[period - 1] && fast[period] > fast[period + 1]);
    }

    #[test]
    fn autocorr_of_noise_is_small_at_half_length() {
        let z = lcg_noise(11, 512);
        let c = autocorr_oracle(&z);
        assert!(c[256].abs() < 0.25 * c[0]);
        assert!((autocorr(&z).unwrap()[256] - c[256]).abs() < 1e-9);
    }

    #[test]
    fn autocorr_rejects_silence() {
        assert!(matches!(autocorr(&[0.0f64; 10]), Err(GaitError::NoSignalEnergy)));
    }

    fn two_step_signal(period: f64, n: usize) -> Vec<f64> {
        // Heel strike at phase 0, shallower opposite-foot strike at phase 0.5.
        (0..n)
            .map(|i| {
                let w = 2.0 * PI * i as f64 / period;
                -0.6 * w.cos() - 1.4 * (2.0 * w).cos()
            })
            .collect()
    }

    /// Brute-force scan of the smoothed coefficients for local maxima.
    fn maxima_oracle(c: &[f64], window: usize, min_lag: usize) -> Vec<usize> {
        let h = window / 2;
        let s: Vec<f64> = (0..c.len())
            .map(|i| {
                let lo = i.saturating_sub(h);
                let hi = (i + h).min(c.len() - 1);
                c[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        (min_lag..c.len() / 2).filter(|&t| s[t] > s[t - 1] && s[t] >= s[t + 1]).collect()
    }

    #[test]
    fn two_harmonic_gait_cycle_length() {
        let z = two_step_signal(30.0, 400);
        let c = autocorr(&z).unwrap();
        let cfg = SegmentationConfig::default();
        let delta = estimate_cycle_length(&c, 27.0, &cfg).unwrap();
        let oracle = maxima_oracle(&autocorr_oracle(&z), 5, cfg.min_lag(27.0));
        assert_eq!(delta, oracle[1]);
        assert!((28..=32).contains(&delta), "{delta}");
        assert!((13..=17).contains(&oracle[0]));
    }

    #[test]
    fn sinusoid_second_maximum_at_twice_period() {
        let period = 20;
        let z: Vec<f64> = (0..600).map(|i| (2.0 * PI * i as f64 / period as f64).sin()).collect();
        let c = autocorr(&z).unwrap();
        let delta = estimate_cycle_length(&c, 27.0, &SegmentationConfig::default()).unwrap();
        assert_eq!(delta, 2 * period);
    }

    #[test]
    fn constant_plus_noise_is_aperiodic() {
        let z: Vec<f64> = lcg_noise(3, 400).iter().map(|n| 5.0 + 0.3 * n).collect();
        let c = autocorr(&z).unwrap();
        assert!(matches!(
            estimate_cycle_length(&c, 27.0, &SegmentationConfig::default()),
            Err(GaitError::Aperiodic)
        ));
    }

    #[test]
    fn strict_minima() {
        let p = find_negative_peaks(&[0.0, -1.0, 0.0, -2.0, 0.0]).unwrap();
        assert_eq!(p.indices, vec![1, 3]);
        assert!(matches!(
            find_negative_peaks(&[0.0, 1.0, 2.0, 3.0]),
            Err(GaitError::TooFewPeaks(0))
        ));
        // Plateau minima fail the strict inequality.
        assert!(find_negative_peaks(&[0.0, -1.0, -1.0, 0.0]).is_err());
    }

    #[test]
    fn depth_threshold() {
        let z = [0.0f64, -2.0, 0.0, -4.0, 0.0, -6.0, 0.0];
        let peaks = PeakSet { indices: vec![1, 3, 5] };
        assert!((magnitude_threshold(&z, &peaks, 1.0) + 6.0).abs() < 1e-12);
        assert!((magnitude_threshold(&z, &peaks, 0.0) + 4.0).abs() < 1e-12);
        let flat = [0.0, -3.0, 0.0, -3.0, 0.0];
        let p = PeakSet { indices: vec![1, 3] };
        assert_eq!(magnitude_threshold(&flat, &p, 2.5), -3.0);
    }

    /// Synthetic Z: deep minima at `deep`, shallow minima at `shallow`.
    fn spiky(n: usize, deep: &[usize], shallow: &[usize]) -> Vec<f64> {
        let mut z = vec![0.0; n];
        for &i in deep {
            z[i] = -5.0;
        }
        for &i in shallow {
            z[i] = -0.5;
        }
        z
    }

    /// Literal membership test for the start set: deep and followed by a
    /// peak `Δ ± ε` later.
    fn omega_oracle(z: &[f64], peaks: &PeakSet, delta: usize, tau: f64, eps: usize) -> Vec<usize> {
        let thr = magnitude_threshold(z, peaks, tau);
        peaks
            .indices
            .iter()
            .enumerate()
            .filter(|&(j, &i)| {
                z[i] < thr
                    && peaks.indices[j + 1..]
                        .iter()
                        .any(|&k| k - i >= delta.saturating_sub(eps) && k - i <= delta + eps)
            })
            .map(|(_, &i)| i)
            .collect()
    }

    #[test]
    fn only_deep_peaks_selected() {
        let deep: Vec<usize> = (0..6).map(|k| 10 + 30 * k).collect();
        let shallow: Vec<usize> = (0..5).map(|k| 25 + 30 * k).collect();
        let z = spiky(200, &deep, &shallow);
        let peaks = find_negative_peaks(&z).unwrap();
        let starts = select_cycle_starts(&z, &peaks, 30, 0.5, 9).unwrap();
        assert_eq!(starts.indices, deep);
        let omega = omega_oracle(&z, &peaks, 30, 0.5, 9);
        for &s in &starts.indices[..starts.indices.len() - 1] {
            assert!(omega.contains(&s));
        }
        for w in starts.indices.windows(2) {
            assert!((21..=39).contains(&(w[1] - w[0])));
        }
    }

    #[test]
    fn shallow_heel_strike_is_bridged() {
        let heel: Vec<usize> = (0..5).map(|k| 10 + 30 * k).collect();
        let off: Vec<usize> = (0..4).map(|k| 25 + 30 * k).collect();
        let mut z = spiky(160, &heel, &off);
        off.iter().for_each(|&i| z[i] = -1.5);
        z[70] = -2.5;
        let peaks = find_negative_peaks(&z).unwrap();
        assert!(z[70] > magnitude_threshold(&z, &peaks, 1.0));
        let starts = select_cycle_starts(&z, &peaks, 30, 1.0, 9).unwrap();
        assert_eq!(starts.indices, heel);
    }

    #[test]
    fn early_shallow_heel_strikes_recovered_backwards() {
        let heel: Vec<usize> = (0..5).map(|k| 10 + 30 * k).collect();
        let off: Vec<usize> = (0..4).map(|k| 25 + 30 * k).collect();
        let mut z = spiky(160, &heel, &off);
        off.iter().for_each(|&i| z[i] = -1.5);
        z[10] = -2.5;
        z[40] = -2.5;
        let peaks = find_negative_peaks(&z).unwrap();
        let delta = magnitude_threshold(&z, &peaks, 1.0);
        assert!(z[10] > delta && z[40] > delta && z[70] < delta);
        let starts = select_cycle_starts(&z, &peaks, 30, 1.0, 9).unwrap();
        assert_eq!(starts.indices, heel);
    }

    #[test]
    fn nothing_deep_enough() {
        let z = spiky(100, &[], &[10, 40, 70]);
        let peaks = find_negative_peaks(&z).unwrap();
        // With τ large the threshold sits below every peak.
        assert!(matches!(
            select_cycle_starts(&z, &peaks, 30, 10.0, 5),
            Err(GaitError::NoCompleteCycle)
        ));
    }

    #[test]
    fn deep_pair_too_far_apart_rejected() {
        // Two deep peaks Δ + 2ε apart: the first has no successor in range.
        let (delta, eps) = (20usize, 3usize);
        let mut z = spiky(80, &[10, 10 + delta + 2 * eps], &[]);
        z[10] = -6.0;
        let peaks = find_negative_peaks(&z).unwrap();
        assert!(z[10] < magnitude_threshold(&z, &peaks, 0.0));
        assert!(select_cycle_starts(&z, &peaks, delta, 0.0, eps).is_err());
    }

    #[test]
    fn split_is_inclusive() {
        let n = 100;
        let sig = GaitSignal {
            rate_hz: 27.0,
            z: (0..n).map(|i| i as f64).collect(),
            xy: vec![0.0; n],
            m: vec![1.0; n],
        };
        let segs = split_cycles(&sig, &CycleStarts { indices: vec![10, 40, 70], cycle_len: 30 });
        assert_eq!(segs.len(), 2);
        assert_eq!((segs[0].len(), segs[1].len()), (31, 31));
        assert_eq!(segs[1].z[0], 40.0);
        let whole = split_cycles(&sig, &CycleStarts { indices: vec![0, n - 1], cycle_len: 30 });
        assert_eq!(whole.len(), 1);
        assert_eq!(whole[0].z, sig.z);
    }
}
