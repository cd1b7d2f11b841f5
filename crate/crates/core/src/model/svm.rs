//! Per-user linear SVM trained by dual coordinate descent.
//!
//! The bias is handled by appending a constant 1 to every example, so the
//! objective being minimized is
//!
//! ```text
//! P(w, b) = ½(‖w‖² + b²) + C Σ max(0, 1 − yᵢ(w·xᵢ + b))
//! ```
//!
//! Examples are visited in a fixed cyclic order and training stops once the
//! duality gap falls below `1e-6·max(1, P)`.

use log::warn;

use crate::error::{GaitError, Result};
use crate::num::{dot, Real};

const GAP_TOL: f64 = 1e-6;
const MAX_EPOCHS: usize = 50_000;

#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<T> {
    pub subject_id: String,
    pub weights: Vec<T>,
    pub bias: T,
    pub c_param: T,
    /// Seed used to draw the impostor training set; 0 when not sampled.
    pub seed: u64,
}

impl<T: Real> SvmModel<T> {
    pub fn decision(&self, v: &[T]) -> T {
        dot(&self.weights, v) + self.bias
    }
}

/// Primal objective of `(w, b)` on labelled examples.
pub fn hinge_objective<T: Real>(weights: &[T], bias: T, positives: &[Vec<T>], negatives: &[Vec<T>], c: T) -> T {
    let reg = (dot(weights, weights) + bias * bias) / T::lit(2.0);
    let loss = |x: &Vec<T>, y: T| (T::one() - y * (dot(weights, x) + bias)).max(T::zero());
    let pos: T = positives.iter().map(|x| loss(x, T::one())).sum();
    let neg: T = negatives.iter().map(|x| loss(x, -T::one())).sum();
    reg + c * (pos + neg)
}

fn same_multiset<T: Real>(a: &[Vec<T>], b: &[Vec<T>]) -> bool {
    let key = |v: &Vec<T>| v.iter().map(|x| x.as_f64().to_bits()).collect::<Vec<u64>>();
    let mut ka: Vec<_> = a.iter().map(key).collect();
    let mut kb: Vec<_> = b.iter().map(key).collect();
    ka.sort();
    kb.sort();
    ka.dedup();
    kb.dedup();
    ka == kb
}

pub fn train_svm<T: Real>(
    subject_id: impl Into<String>,
    positives: &[Vec<T>],
    negatives: &[Vec<T>],
    c_param: T,
) -> Result<SvmModel<T>> {
    if positives.is_empty() || negatives.is_empty() {
        return Err(GaitError::DegenerateTraining(format!(
            "{} positive and {} negative examples",
            positives.len(),
            negatives.len()
        )));
    }
    if !(c_param > T::zero() && c_param.is_finite()) {
        return Err(GaitError::InvalidConfig(format!("svm C must be positive, got {c_param}")));
    }
    let d = positives[0].len();
    if let Some(bad) = positives.iter().chain(negatives).find(|v| v.len() != d) {
        return Err(GaitError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if positives.iter().chain(negatives).flatten().any(|v| !v.is_finite()) {
        return Err(GaitError::NonFinite("svm training data".into()));
    }
    if same_multiset(positives, negatives) {
        return Err(GaitError::DegenerateTraining("positive and negative sets are identical".into()));
    }

    let subject_id = subject_id.into();
    let examples: Vec<(&[T], T)> = positives
        .iter()
        .map(|x| (x.as_slice(), T::one()))
        .chain(negatives.iter().map(|x| (x.as_slice(), -T::one())))
        .collect();
    let q_diag: Vec<T> = examples.iter().map(|(x, _)| dot(x, x) + T::one()).collect();
    let mut alpha = vec![T::zero(); examples.len()];
    // w[..d] are the weights, w[d] the bias.
    let mut w = vec![T::zero(); d + 1];
    let tol = T::attainable(GAP_TOL);

    let margin = |w: &[T], x: &[T]| dot(&w[..d], x) + w[d];
    let mut converged = false;
    for _ in 0..MAX_EPOCHS {
        for (i, &(x, y)) in examples.iter().enumerate() {
            let g = y * margin(&w, x) - T::one();
            let a = alpha[i];
            let projected = if a == T::zero() {
                g.min(T::zero())
            } else if a == c_param {
                g.max(T::zero())
            } else {
                g
            };
            if projected == T::zero() {
                continue;
            }
            let next = (a - g / q_diag[i]).max(T::zero()).min(c_param);
            let step = (next - a) * y;
            alpha[i] = next;
            for (wj, &xj) in w[..d].iter_mut().zip(x) {
                *wj += step * xj;
            }
            w[d] += step;
        }

        let half_norm = dot(&w, &w) / T::lit(2.0);
        let loss: T = examples
            .iter()
            .map(|&(x, y)| (T::one() - y * margin(&w, x)).max(T::zero()))
            .sum();
        let primal = half_norm + c_param * loss;
        let dual = alpha.iter().copied().sum::<T>() - half_norm;
        if primal - dual <= tol * primal.abs().max(T::one()) {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("svm for subject {subject_id} stopped after {MAX_EPOCHS} epochs without reaching the gap tolerance");
    }

    let bias = w.pop().expect("bias slot");
    Ok(SvmModel {
        subject_id,
        weights: w,
        bias,
        c_param,
        seed: 0,
    })
}

/// Signed margin `w·probe + b`.
pub fn svm_score<T: Real>(model: &SvmModel<T>, probe: &[T]) -> Result<T> {
    if probe.len() != model.weights.len() {
        return Err(GaitError::DimensionMismatch {
            expected: model.weights.len(),
            got: probe.len(),
        });
    }
    Ok(model.decision(probe))
}
