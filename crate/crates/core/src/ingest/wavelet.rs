//! Periodized Daubechies-6 discrete wavelet transform.
//!
//! The filter bank is applied with periodic extension, which keeps the
//! transform orthonormal: for even-length inputs the analysis step is an
//! orthogonal matrix and the synthesis step is its transpose. Odd lengths are
//! padded by repeating the final sample before a level is decomposed and the
//! padding is cut off again on reconstruction.

use crate::error::{GaitError, Result};
use crate::num::Real;

/// Db6 scaling (low-pass) filter, 12 taps, normalized to sum to √2.
#[allow(clippy::excessive_precision)]
pub const DB6_LO: [f64; 12] = [
    0.111_540_743_350_109_463_62,
    0.494_623_890_398_453_085_68,
    0.751_133_908_021_095_350_68,
    0.315_250_351_709_197_629_09,
    -0.226_264_693_965_439_820_08,
    -0.129_766_867_567_261_935_56,
    0.097_501_605_587_323_049_102,
    0.027_522_865_530_305_728_626,
    -0.031_582_039_317_486_029_565,
    0.000_553_842_201_161_496_139_25,
    0.004_777_257_510_945_510_639_6,
    -0.001_077_301_085_308_479_564_9,
];

const TAPS: usize = DB6_LO.len();

fn filters<T: Real>() -> ([T; TAPS], [T; TAPS]) {
    let lo: [T; TAPS] = DB6_LO.map(T::lit);
    // Quadrature mirror: g[n] = (-1)^n h[L-1-n].
    let hi: [T; TAPS] = std::array::from_fn(|n| {
        let h = lo[TAPS - 1 - n];
        if n % 2 == 0 {
            h
        } else {
            -h
        }
    });
    (lo, hi)
}

/// Multi-level decomposition: the coarsest approximation plus the detail
/// bands, finest first.
#[derive(Clone, Debug, PartialEq)]
pub struct WaveletDecomposition<T> {
    pub approx: Vec<T>,
    pub details: Vec<Vec<T>>,
    /// Signal length entering each level (before any odd-length padding).
    lengths: Vec<usize>,
}

impl<T: Real> WaveletDecomposition<T> {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn zero_details(&mut self) {
        for d in &mut self.details {
            d.iter_mut().for_each(|c| *c = T::zero());
        }
    }
}

fn analysis_step<T: Real>(x: &[T], lo: &[T; TAPS], hi: &[T; TAPS]) -> (Vec<T>, Vec<T>) {
    let n = x.len();
    debug_assert!(n.is_multiple_of(2));
    let half = n / 2;
    let mut a = vec![T::zero(); half];
    let mut d = vec![T::zero(); half];
    for k in 0..half {
        let (mut sa, mut sd) = (T::zero(), T::zero());
        for tap in 0..TAPS {
            let v = x[(2 * k + tap) % n];
            sa += lo[tap] * v;
            sd += hi[tap] * v;
        }
        a[k] = sa;
        d[k] = sd;
    }
    (a, d)
}

fn synthesis_step<T: Real>(a: &[T], d: &[T], lo: &[T; TAPS], hi: &[T; TAPS]) -> Vec<T> {
    let n = 2 * a.len();
    let mut x = vec![T::zero(); n];
    for k in 0..a.len() {
        for tap in 0..TAPS {
            x[(2 * k + tap) % n] += lo[tap] * a[k] + hi[tap] * d[k];
        }
    }
    x
}

/// Decomposes `x` into `levels` bands.
pub fn wavedec<T: Real>(x: &[T], levels: usize) -> Result<WaveletDecomposition<T>> {
    if levels == 0 {
        return Err(GaitError::InvalidConfig("wavelet levels must be >= 1".into()));
    }
    if x.len() < TAPS {
        return Err(GaitError::TooShort {
            what: "wavelet input",
            need: TAPS,
            got: x.len(),
        });
    }
    let (lo, hi) = filters::<T>();
    let mut approx = x.to_vec();
    let mut details = Vec::with_capacity(levels);
    let mut lengths = Vec::with_capacity(levels);
    for _ in 0..levels {
        lengths.push(approx.len());
        if approx.len() % 2 == 1 {
            approx.push(*approx.last().expect("non-empty"));
        }
        let (a, d) = analysis_step(&approx, &lo, &hi);
        approx = a;
        details.push(d);
    }
    Ok(WaveletDecomposition {
        approx,
        details,
        lengths,
    })
}

/// Inverts [`wavedec`].
pub fn waverec<T: Real>(dec: &WaveletDecomposition<T>) -> Vec<T> {
    let (lo, hi) = filters::<T>();
    let mut x = dec.approx.clone();
    for (d, &len) in dec.details.iter().zip(&dec.lengths).rev() {
        x = synthesis_step(&x, d, &lo, &hi);
        x.truncate(len);
    }
    x
}

/// Removes every detail band: decomposes to `levels`, zeroes all detail
/// coefficients and reconstructs from the coarse approximation alone.
/// Output length equals input length.
pub fn wavelet_denoise<T: Real>(x: &[T], levels: usize) -> Result<Vec<T>> {
    let mut dec = wavedec(x, levels)?;
    dec.zero_details();
    Ok(waverec(&dec))
}
