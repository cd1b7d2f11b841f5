//! Principal component analysis via cyclic Jacobi eigen-decomposition.

use crate::error::{GaitError, Result};
use crate::num::{dot, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `k` orthonormal eigenvectors, one per entry, each of the input
    /// dimension.
    pub basis: Vec<Vec<T>>,
    /// Eigenvalues of the retained components, non-increasing.
    pub eigenvalues: Vec<T>,
    /// Sum of all eigenvalues (the covariance trace).
    pub total_variance: T,
    /// Fraction of `total_variance` captured by the retained components.
    pub captured: T,
}

impl<T: Real> PcaModel<T> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn k(&self) -> usize {
        self.basis.len()
    }

    /// `(v − mean)·U`.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.dim() {
            return Err(GaitError::DimensionMismatch {
                expected: self.dim(),
                got: v.len(),
            });
        }
        let centered: Vec<T> = v.iter().zip(&self.mean).map(|(&a, &m)| a - m).collect();
        Ok(self.basis.iter().map(|u| dot(&centered, u)).collect())
    }

    /// `mean + y·Uᵀ`.
    pub fn reconstruct(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.k() {
            return Err(GaitError::DimensionMismatch {
                expected: self.k(),
                got: y.len(),
            });
        }
        let mut out = self.mean.clone();
        for (&c, u) in y.iter().zip(&self.basis) {
            for (o, &ui) in out.iter_mut().zip(u) {
                *o += c * ui;
            }
        }
        Ok(out)
    }
}

/// Population covariance `1/M Σ (v − v̄)ᵀ(v − v̄)` of the rows, plus the mean.
pub fn covariance<T: Real>(rows: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let first = rows.first().ok_or(GaitError::Empty)?;
    let d = first.len();
    if let Some(bad) = rows.iter().find(|r| r.len() != d) {
        return Err(GaitError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    let m = T::from_usize_lossy(rows.len());
    let mut mean = vec![T::zero(); d];
    for r in rows {
        for (a, &v) in mean.iter_mut().zip(r) {
            *a += v;
        }
    }
    mean.iter_mut().for_each(|a| *a /= m);

    let mut cov = vec![vec![T::zero(); d]; d];
    let mut centered = vec![T::zero(); d];
    for r in rows {
        for ((c, &v), &mu) in centered.iter_mut().zip(r).zip(&mean) {
            *c = v - mu;
        }
        for i in 0..d {
            let ci = centered[i];
            if ci == T::zero() {
                continue;
            }
            for (cell, &cj) in cov[i][i..].iter_mut().zip(&centered[i..]) {
                *cell += ci * cj;
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            let v = cov[i][j] / m;
            cov[i][j] = v;
            cov[j][i] = v;
        }
    }
    Ok((mean, cov))
}

const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
///
/// Returns eigenvalues in non-increasing order with matching unit
/// eigenvectors; each vector's largest-magnitude component is positive.
pub fn symmetric_eigen<T: Real>(a: &[Vec<T>]) -> Result<(Vec<T>, Vec<Vec<T>>)> {
    let n = a.len();
    if let Some(bad) = a.iter().find(|r| r.len() != n) {
        return Err(GaitError::DimensionMismatch {
            expected: n,
            got: bad.len(),
        });
    }
    if a.iter().flatten().any(|v| !v.is_finite()) {
        return Err(GaitError::NonFinite("matrix".into()));
    }
    let mut m: Vec<T> = a.iter().flatten().copied().collect();
    let mut v = vec![T::zero(); n * n];
    for i in 0..n {
        v[i * n + i] = T::one();
    }

    let frob = m.iter().map(|&x| x * x).sum::<T>().sqrt();
    let tol = T::attainable(1e-10) * frob.max(T::one());
    let two = T::lit(2.0);

    for _ in 0..MAX_SWEEPS {
        let off = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| two * m[i * n + j] * m[i * n + j])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[p * n + q];
                if apq == T::zero() {
                    continue;
                }
                let theta = (m[q * n + q] - m[p * n + p]) / (two * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (mkp, mkq) = (m[k * n + p], m[k * n + q]);
                    m[k * n + p] = c * mkp - s * mkq;
                    m[k * n + q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let (mpk, mqk) = (m[p * n + k], m[q * n + k]);
                    m[p * n + k] = c * mpk - s * mqk;
                    m[q * n + k] = s * mpk + c * mqk;
                }
                m[p * n + q] = T::zero();
                m[q * n + p] = T::zero();
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| {
        m[j * n + j]
            .partial_cmp(&m[i * n + i])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(i.cmp(&j))
    });
    let values = order.iter().map(|&i| m[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&j| {
            let mut col: Vec<T> = (0..n).map(|k| v[k * n + j]).collect();
            let lead = col
                .iter()
                .copied()
                .fold(T::zero(), |best, x| if x.abs() > best.abs() { x } else { best });
            if lead < T::zero() {
                col.iter_mut().for_each(|x| *x = -*x);
            }
            col
        })
        .collect();
    Ok((values, vectors))
}

/// Fits the mean and the smallest eigenbasis whose cumulative variance
/// reaches `variance_fraction`.
pub fn fit_pca<T: Real>(rows: &[Vec<T>], variance_fraction: T) -> Result<PcaModel<T>> {
    if !(variance_fraction > T::zero() && variance_fraction <= T::one()) {
        return Err(GaitError::InvalidConfig(format!(
            "variance fraction {variance_fraction} outside (0, 1]"
        )));
    }
    if rows.len() < 2 {
        return Err(GaitError::TooShort {
            what: "PCA training rows",
            need: 2,
            got: rows.len(),
        });
    }
    if rows.iter().all(|r| r == &rows[0]) {
        return Err(GaitError::ZeroVariance);
    }
    let (mean, cov) = covariance(rows)?;
    let (mut values, vectors) = symmetric_eigen(&cov)?;
    // Round-off can leave tiny negative eigenvalues on a PSD matrix.
    values.iter_mut().for_each(|l| *l = l.max(T::zero()));
    let total: T = values.iter().copied().sum();
    if total <= T::zero() {
        return Err(GaitError::ZeroVariance);
    }

    let mut k = values.len();
    let mut acc = T::zero();
    for (i, &l) in values.iter().enumerate() {
        acc += l;
        if acc / total >= variance_fraction {
            k = i + 1;
            break;
        }
    }
    let kept = &values[..k];
    Ok(PcaModel {
        mean,
        basis: vectors.into_iter().take(k).collect(),
        eigenvalues: kept.to_vec(),
        total_variance: total,
        captured: kept.iter().copied().sum::<T>() / total,
    })
}
