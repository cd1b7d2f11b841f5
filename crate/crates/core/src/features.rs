//! Gait pattern assembly and the 289-dimensional feature vector.
//!
//! Layout of a feature vector (channel order Z, XY, M throughout):
//!
//! | range     | content                                                        |
//! |-----------|----------------------------------------------------------------|
//! | 0..48     | per channel: mean segment max, mean segment min, average       |
//! |           | absolute deviation, RMS, standard deviation, waveform length,  |
//! |           | 10-bin normalized histogram (16 values per channel)            |
//! | 48        | average segment length in samples (shared by all channels)     |
//! | 49..289   | per channel: \|DFT\| of bins 0..39, then DCT-II coefficients   |
//! |           | 0..39, both over the channel zero-padded to 256 samples        |

use std::io::{Read, Write};

use log::warn;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{GaitError, Result};
use crate::num::Real;
use crate::segmentation::CycleSegment;

pub const HIST_BINS: usize = 10;
pub const SPECTRUM_LEN: usize = 256;
pub const SPECTRUM_COEFFS: usize = 40;
const PER_CHANNEL_TIME: usize = 6 + HIST_BINS;
pub const TIME_FEATURES: usize = 3 * PER_CHANNEL_TIME + 1;
pub const FREQ_FEATURES: usize = 3 * 2 * SPECTRUM_COEFFS;
pub const FEATURE_LEN: usize = TIME_FEATURES + FREQ_FEATURES;

const CHANNELS: [&str; 3] = ["z", "xy", "m"];

/// `n_s` consecutive cycles concatenated on each channel.
#[derive(Clone, Debug, PartialEq)]
pub struct GaitPattern<T> {
    pub z: Vec<T>,
    pub xy: Vec<T>,
    pub m: Vec<T>,
    /// Offsets of each segment within the channels; `n_s + 1` entries,
    /// starting at 0 and ending at the channel length.
    pub segment_bounds: Vec<usize>,
}

impl<T: Real> GaitPattern<T> {
    pub fn channels(&self) -> [&[T]; 3] {
        [&self.z, &self.xy, &self.m]
    }

    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    fn segments<'a>(&'a self, channel: &'a [T]) -> impl Iterator<Item = &'a [T]> + 'a {
        self.segment_bounds.windows(2).map(move |w| &channel[w[0]..w[1]])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector<T> {
    pub values: Vec<T>,
    pub subject_id: String,
    pub session_id: String,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct FeatureConfig {
    /// First DFT bin reported; 0 keeps the DC term.
    pub freq_bin_offset: usize,
}

/// Overlapping patterns of `n_s` segments with a stride of `n_s / 2`.
/// Sessions with fewer than `n_s` segments yield no patterns.
pub fn extract_patterns<T: Real>(segments: &[CycleSegment<T>], n_s: usize) -> Vec<GaitPattern<T>> {
    if n_s == 0 || segments.len() < n_s {
        return Vec::new();
    }
    let stride = (n_s / 2).max(1);
    (0..=segments.len() - n_s)
        .step_by(stride)
        .map(|offset| {
            let group = &segments[offset..offset + n_s];
            let mut pattern = GaitPattern {
                z: Vec::new(),
                xy: Vec::new(),
                m: Vec::new(),
                segment_bounds: vec![0],
            };
            for s in group {
                pattern.z.extend_from_slice(&s.z);
                pattern.xy.extend_from_slice(&s.xy);
                pattern.m.extend_from_slice(&s.m);
                pattern.segment_bounds.push(pattern.z.len());
            }
            pattern
        })
        .collect()
}

fn histogram<T: Real>(x: &[T]) -> [T; HIST_BINS] {
    let mut counts = [0usize; HIST_BINS];
    let lo = x.iter().copied().fold(T::infinity(), T::min);
    let hi = x.iter().copied().fold(T::neg_infinity(), T::max);
    let width = hi - lo;
    for &v in x {
        let bin = if width > T::zero() {
            ((v - lo) / width * T::from_usize_lossy(HIST_BINS))
                .floor()
                .to_usize()
                .unwrap_or(0)
                .min(HIST_BINS - 1)
        } else {
            0
        };
        counts[bin] += 1;
    }
    let n = T::from_usize_lossy(x.len().max(1));
    counts.map(|c| T::from_usize_lossy(c) / n)
}

fn channel_time_features<T: Real>(p: &GaitPattern<T>, x: &[T], out: &mut Vec<T>) {
    let n = T::from_usize_lossy(x.len());
    let n_seg = T::from_usize_lossy(p.segment_bounds.len() - 1);
    let mean_max = p
        .segments(x)
        .map(|s| s.iter().copied().fold(T::neg_infinity(), T::max))
        .sum::<T>()
        / n_seg;
    let mean_min = p
        .segments(x)
        .map(|s| s.iter().copied().fold(T::infinity(), T::min))
        .sum::<T>()
        / n_seg;
    let mean = x.iter().copied().sum::<T>() / n;
    let aad = x.iter().map(|&v| (v - mean).abs()).sum::<T>() / n;
    let rms = (x.iter().map(|&v| v * v).sum::<T>() / n).sqrt();
    let std = if x.len() > 1 {
        (x.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / (n - T::one())).sqrt()
    } else {
        T::zero()
    };
    let waveform: T = x.windows(2).map(|w| (w[1] - w[0]).abs()).sum();

    out.extend([mean_max, mean_min, aad, rms, std, waveform]);
    out.extend(histogram(x));
}

/// The 49 time-domain features.
pub fn time_features<T: Real>(p: &GaitPattern<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(TIME_FEATURES);
    for x in p.channels() {
        channel_time_features(p, x, &mut out);
    }
    let gaps = p.segment_bounds.windows(2).map(|w| T::from_usize_lossy(w[1] - w[0]));
    out.push(gaps.sum::<T>() / T::from_usize_lossy(p.segment_bounds.len() - 1));
    out
}

fn padded<T: Real>(x: &[T]) -> Vec<T> {
    if x.len() > SPECTRUM_LEN {
        warn!(
            "pattern channel of {} samples truncated to {SPECTRUM_LEN} for spectral features",
            x.len()
        );
    }
    let mut v: Vec<T> = x.iter().copied().take(SPECTRUM_LEN).collect();
    v.resize(SPECTRUM_LEN, T::zero());
    v
}

/// DCT-II `X_k = Σ x_n cos(πk(2n+1)/2N)` through one complex FFT of the
/// even/odd reordered input.
fn dct2<T: Real>(x: &[T], planner: &mut FftPlanner<T>) -> Vec<T> {
    let n = x.len();
    let fft = planner.plan_fft_forward(n);
    let mut v = vec![Complex::new(T::zero(), T::zero()); n];
    for k in 0..n / 2 {
        v[k].re = x[2 * k];
        v[n - 1 - k].re = x[2 * k + 1];
    }
    if n % 2 == 1 {
        v[n / 2].re = x[n - 1];
    }
    fft.process(&mut v);
    let step = -T::PI() / T::from_usize_lossy(2 * n);
    v.iter()
        .enumerate()
        .map(|(k, c)| {
            let (s, co) = (step * T::from_usize_lossy(k)).sin_cos();
            c.re * co - c.im * s
        })
        .collect()
}

/// The 240 frequency-domain features.
pub fn freq_features<T: Real>(p: &GaitPattern<T>, cfg: &FeatureConfig) -> Vec<T> {
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(SPECTRUM_LEN);
    let bins = cfg.freq_bin_offset..cfg.freq_bin_offset + SPECTRUM_COEFFS;
    let mut out = Vec::with_capacity(FREQ_FEATURES);
    for x in p.channels() {
        let x = padded(x);
        let mut spectrum: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        fft.process(&mut spectrum);
        out.extend(bins.clone().map(|k| spectrum.get(k).map_or(T::zero(), |c| c.norm())));
        out.extend(dct2(&x, &mut planner).into_iter().take(SPECTRUM_COEFFS));
    }
    out
}

/// Time features followed by frequency features; 289 values.
pub fn feature_vector<T: Real>(
    p: &GaitPattern<T>,
    cfg: &FeatureConfig,
    subject_id: impl Into<String>,
    session_id: impl Into<String>,
) -> Result<FeatureVector<T>> {
    let mut values = time_features(p);
    values.extend(freq_features(p, cfg));
    debug_assert_eq!(values.len(), FEATURE_LEN);
    if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
        return Err(GaitError::NonFiniteFeature(bad));
    }
    Ok(FeatureVector {
        values,
        subject_id: subject_id.into(),
        session_id: session_id.into(),
    })
}

/// Human-readable names in vector order.
pub fn feature_names() -> Vec<String> {
    let time = ["mean_max", "mean_min", "aad", "rms", "std", "waveform_len"];
    let mut names = Vec::with_capacity(FEATURE_LEN);
    for ch in CHANNELS {
        names.extend(time.iter().map(|t| format!("{ch}_{t}")));
        names.extend((0..HIST_BINS).map(|b| format!("{ch}_hist{b}")));
    }
    names.push("avg_segment_len".into());
    for ch in CHANNELS {
        names.extend((0..SPECTRUM_COEFFS).map(|k| format!("{ch}_dft{k}")));
        names.extend((0..SPECTRUM_COEFFS).map(|k| format!("{ch}_dct{k}")));
    }
    names
}

/// Writes vectors as CSV `subject_id,session_id,f0..f288`.
pub fn write_features_csv<T: Real, W: Write>(vectors: &[FeatureVector<T>], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["subject_id".to_string(), "session_id".to_string()];
    header.extend((0..FEATURE_LEN).map(|i| format!("f{i}")));
    w.write_record(&header)?;
    for v in vectors {
        let mut row = vec![v.subject_id.clone(), v.session_id.clone()];
        row.extend(v.values.iter().map(|x| x.to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| GaitError::io("<features writer>", e))?;
    Ok(())
}

pub fn read_features_csv<T: Real, R: Read>(input: R) -> Result<Vec<FeatureVector<T>>> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = r.headers()?.clone();
    if header.len() != FEATURE_LEN + 2 || &header[0] != "subject_id" || &header[1] != "session_id" {
        return Err(GaitError::Parse {
            line: 1,
            msg: format!("expected header subject_id,session_id,f0..f{}", FEATURE_LEN - 1),
        });
    }
    let mut out = Vec::new();
    for row in r.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let values = row
            .iter()
            .skip(2)
            .map(|f| {
                f.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(T::lit)
                    .ok_or_else(|| GaitError::Parse {
                        line,
                        msg: format!("invalid feature value '{f}'"),
                    })
            })
            .collect::<Result<Vec<T>>>()?;
        out.push(FeatureVector {
            values,
            subject_id: row[0].to_string(),
            session_id: row[1].to_string(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn seg(z: Vec<f64>, xy: Vec<f64>, m: Vec<f64>) -> CycleSegment<f64> {
        CycleSegment { z, xy, m, start_index: 0 }
    }

    fn uniform_segments(count: usize, len: usize) -> Vec<CycleSegment<f64>> {
        (0..count)
            .map(|k| {
                let z: Vec<f64> = (0..len).map(|i| ((i + k) as f64 * 0.3).sin()).collect();
                seg(z.clone(), z.iter().map(|v| v.abs()).collect(), z.iter().map(|v| 1.0 + v * v).collect())
            })
            .collect()
    }

    fn pattern_from(z: Vec<f64>, xy: Vec<f64>, m: Vec<f64>, bounds: Vec<usize>) -> GaitPattern<f64> {
        GaitPattern { z, xy, m, segment_bounds: bounds }
    }

    #[test]
    fn feature_length_identity() {
        assert_eq!(3 * (6 + 10) + 1 + 3 * (40 + 40), 289);
        assert_eq!(FEATURE_LEN, 289);
        assert_eq!(feature_names().len(), FEATURE_LEN);
    }

    #[test]
    fn pattern_counts_follow_stride() {
        let segs = uniform_segments(8, 30);
        let p = extract_patterns(&segs, 4);
        assert_eq!(p.len(), 3);
        assert_eq!(p[1].z[..30], segs[2].z[..]);
        assert_eq!(p[2].z[..30], segs[4].z[..]);
        assert_eq!(p[0].segment_bounds, vec![0, 30, 60, 90, 120]);
        assert_eq!(extract_patterns(&segs[..4], 4).len(), 1);
        assert!(extract_patterns(&segs[..3], 4).is_empty());
    }

    #[test]
    fn constant_pattern_time_features() {
        let c = 2.5;
        let p = pattern_from(vec![c; 40], vec![c; 40], vec![c; 40], vec![0, 10, 20, 30, 40]);
        let f = time_features(&p);
        assert_eq!(f.len(), TIME_FEATURES);
        for ch in 0..3 {
            let b = ch * PER_CHANNEL_TIME;
            assert_eq!(&f[b..b + 6], &[c, c, 0.0, c, 0.0, 0.0]);
            assert_eq!(f[b + 6], 1.0);
            assert!(f[b + 7..b + 16].iter().all(|&h| h == 0.0));
        }
    }

    #[test]
    fn per_segment_extrema_are_averaged() {
        let p = pattern_from(vec![0.0, 1.0, 0.0, -1.0], vec![0.0; 4], vec![0.0; 4], vec![0, 2, 4]);
        let f = time_features(&p);
        assert_eq!((f[0], f[1]), (0.5, -0.5));
    }

    #[test]
    fn average_segment_length() {
        let p = pattern_from(vec![0.0; 120], vec![0.0; 120], vec![0.0; 120], vec![0, 30, 61, 90, 120]);
        assert_eq!(time_features(&p)[TIME_FEATURES - 1], 30.0);
    }

    /// O(n²) DFT magnitude and DCT-II directly from their definitions.
    fn spectral_oracle(x: &[f64], offset: usize) -> Vec<f64> {
        let n = SPECTRUM_LEN;
        let mut v: Vec<f64> = x.iter().copied().take(n).collect();
        v.resize(n, 0.0);
        let mut out = Vec::new();
        for k in offset..offset + SPECTRUM_COEFFS {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, &s) in v.iter().enumerate() {
                let a = -2.0 * PI * (k * i) as f64 / n as f64;
                re += s * a.cos();
                im += s * a.sin();
            }
            out.push((re * re + im * im).sqrt());
        }
        for k in 0..SPECTRUM_COEFFS {
            out.push(
                v.iter()
                    .enumerate()
                    .map(|(i, &s)| s * (PI * k as f64 * (2 * i + 1) as f64 / (2 * n) as f64).cos())
                    .sum(),
            );
        }
        out
    }

    #[test]
    fn zero_pattern_has_zero_spectrum() {
        let p = pattern_from(vec![0.0; 50], vec![0.0; 50], vec![0.0; 50], vec![0, 50]);
        assert!(freq_features(&p, &FeatureConfig::default()).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_channel_leakage_matches_oracle() {
        let (c, len) = (1.75, 120);
        let p = pattern_from(vec![c; len], vec![0.0; len], vec![0.0; len], vec![0, len]);
        let f = freq_features(&p, &FeatureConfig::default());
        assert!((f[0] - c * len as f64).abs() < 1e-9);
        let oracle = spectral_oracle(&p.z, 0);
        for (a, b) in f[..80].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn cosine_peaks_at_its_bin() {
        let x: Vec<f64> = (0..SPECTRUM_LEN).map(|i| (2.0 * PI * 4.0 * i as f64 / 256.0).cos()).collect();
        let p = pattern_from(x.clone(), x.clone(), x, vec![0, SPECTRUM_LEN]);
        let f = freq_features(&p, &FeatureConfig::default());
        let dft = &f[..SPECTRUM_COEFFS];
        let argmax = (0..SPECTRUM_COEFFS).max_by(|&a, &b| dft[a].total_cmp(&dft[b])).unwrap();
        assert_eq!(argmax, 4);
        assert!((dft[4] - 128.0).abs() < 1e-9);
    }

    #[test]
    fn bin_offset_skips_dc() {
        let x: Vec<f64> = (0..100).map(|i| 1.0 + (i as f64 * 0.2).sin()).collect();
        let p = pattern_from(x.clone(), x.clone(), x.clone(), vec![0, 100]);
        let shifted = freq_features(&p, &FeatureConfig { freq_bin_offset: 1 });
        let oracle = spectral_oracle(&x, 1);
        for (a, b) in shifted[..80].iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn long_channels_are_truncated() {
        let x: Vec<f64> = (0..300).map(|i| (i as f64 * 0.1).cos()).collect();
        let p = pattern_from(x.clone(), x.clone(), x.clone(), vec![0, 300]);
        let f = freq_features(&p, &FeatureConfig::default());
        let oracle = spectral_oracle(&x, 0);
        assert!((f[10] - oracle[10]).abs() < 1e-6);
    }

    #[test]
    fn vector_is_deterministic_and_channel_ordered() {
        let segs = uniform_segments(4, 25);
        let p = extract_patterns(&segs, 4).remove(0);
        let cfg = FeatureConfig::default();
        let a = feature_vector(&p, &cfg, "s1", "1").unwrap();
        let b = feature_vector(&p, &cfg, "s1", "1").unwrap();
        assert_eq!(a.values.len(), 289);
        assert_eq!(a, b);
        let swapped = GaitPattern { z: p.m.clone(), m: p.z.clone(), ..p.clone() };
        assert_ne!(feature_vector(&swapped, &cfg, "s1", "1").unwrap().values, a.values);
    }

    #[test]
    fn csv_round_trip() {
        let segs = uniform_segments(6, 20);
        let cfg = FeatureConfig::default();
        let vecs: Vec<_> = extract_patterns(&segs, 4)
            .iter()
            .map(|p| feature_vector(p, &cfg, "S01", "2").unwrap())
            .collect();
        let mut buf = Vec::new();
        write_features_csv(&vecs, &mut buf).unwrap();
        let back: Vec<FeatureVector<f64>> = read_features_csv(buf.as_slice()).unwrap();
        assert_eq!(back, vecs);
    }

    fn random_pattern() -> impl Strategy<Value = GaitPattern<f64>> {
        (proptest::collection::vec(5usize..40, 4), any::<u64>()).prop_map(|(lens, seed)| {
            let total: usize = lens.iter().sum();
            let mut s = seed;
            let mut next = move || {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                (s >> 11) as f64 / (1u64 << 53) as f64 * 8.0 - 4.0
            };
            let z: Vec<f64> = (0..total).map(|_| next()).collect();
            let xy: Vec<f64> = (0..total).map(|_| next().abs()).collect();
            let m: Vec<f64> = z.iter().zip(&xy).map(|(a, b)| a.hypot(*b)).collect();
            let mut bounds = vec![0];
            for l in lens {
                bounds.push(bounds.last().unwrap() + l);
            }
            GaitPattern { z, xy, m, segment_bounds: bounds }
        })
    }

    fn hist_ranges() -> Vec<std::ops::Range<usize>> {
        (0..3).map(|c| c * PER_CHANNEL_TIME + 6..c * PER_CHANNEL_TIME + 16).collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn spectrum_matches_quadratic_oracle(p in random_pattern()) {
            let f = freq_features(&p, &FeatureConfig::default());
            for (ch, x) in p.channels().iter().enumerate() {
                let oracle = spectral_oracle(x, 0);
                for (a, b) in f[ch * 80..ch * 80 + 80].iter().zip(&oracle) {
                    prop_assert!((a - b).abs() < 1e-6, "{} vs {}", a, b);
                }
            }
        }

        #[test]
        fn amplitude_scaling(p in random_pattern(), exp in -3i32..4, s in 0.1f64..10.0) {
            let scaled = |p: &GaitPattern<f64>, k: f64| GaitPattern {
                z: p.z.iter().map(|v| v * k).collect(),
                xy: p.xy.iter().map(|v| v * k).collect(),
                m: p.m.iter().map(|v| v * k).collect(),
                segment_bounds: p.segment_bounds.clone(),
            };
            let cfg = FeatureConfig::default();
            let base = feature_vector(&p, &cfg, "a", "1").unwrap().values;
            let f = feature_vector(&scaled(&p, s), &cfg, "a", "1").unwrap().values;
            let hist: Vec<usize> = hist_ranges().into_iter().flatten().collect();
            for i in 0..FEATURE_LEN {
                if hist.contains(&i) || i == TIME_FEATURES - 1 {
                    continue;
                }
                prop_assert!((f[i] - s * base[i]).abs() <= 1e-9 * (1.0 + (s * base[i]).abs()));
            }
            // Power-of-two scaling is exact, so bin membership cannot move.
            let k = 2f64.powi(exp);
            let g = feature_vector(&scaled(&p, k), &cfg, "a", "1").unwrap().values;
            for i in hist {
                prop_assert_eq!(g[i], base[i]);
            }
        }

        #[test]
        fn reversal_keeps_rms_std_histogram(p in random_pattern()) {
            let rev = |x: &[f64]| x.iter().rev().copied().collect::<Vec<_>>();
            let total = p.len();
            let r = GaitPattern {
                z: rev(&p.z),
                xy: rev(&p.xy),
                m: rev(&p.m),
                segment_bounds: p.segment_bounds.iter().rev().map(|b| total - b).collect(),
            };
            let a = time_features(&p);
            let b = time_features(&r);
            for ch in 0..3 {
                let o = ch * PER_CHANNEL_TIME;
                prop_assert!((a[o + 3] - b[o + 3]).abs() < 1e-9);
                prop_assert!((a[o + 4] - b[o + 4]).abs() < 1e-9);
                for i in o + 6..o + 16 {
                    prop_assert!((a[i] - b[i]).abs() < 1e-12);
                }
            }
        }
    }
}
