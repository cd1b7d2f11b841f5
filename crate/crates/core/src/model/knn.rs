//! Template matching on PCA-reduced vectors.

use crate::error::{GaitError, Result};
use crate::num::{sq_dist, Real};

/// Stored templates, in insertion order.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Gallery<T> {
    pub entries: Vec<(String, Vec<T>)>,
}

impl<T: Real> Gallery<T> {
    pub fn new() -> Self {
        Gallery { entries: Vec::new() }
    }

    pub fn push(&mut self, subject_id: impl Into<String>, v: Vec<T>) -> Result<()> {
        if let Some((_, first)) = self.entries.first() {
            if first.len() != v.len() {
                return Err(GaitError::DimensionMismatch {
                    expected: first.len(),
                    got: v.len(),
                });
            }
        }
        self.entries.push((subject_id.into(), v));
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn check_dim(&self, probe: &[T]) -> Result<()> {
        match self.entries.first() {
            Some((_, v)) if v.len() != probe.len() => Err(GaitError::DimensionMismatch {
                expected: v.len(),
                got: probe.len(),
            }),
            _ => Ok(()),
        }
    }
}

/// `−(distance to the nearest template of subject_id)`.
pub fn knn_verify<T: Real>(gallery: &Gallery<T>, subject_id: &str, probe: &[T]) -> Result<T> {
    gallery.check_dim(probe)?;
    gallery
        .entries
        .iter()
        .filter(|(s, _)| s == subject_id)
        .map(|(_, v)| sq_dist(v, probe))
        .fold(None, |best: Option<T>, d| Some(best.map_or(d, |b| b.min(d))))
        .map(|d| -d.sqrt())
        .ok_or_else(|| GaitError::UnknownSubject(subject_id.to_string()))
}

/// Subject of the globally nearest template; the first entry wins ties.
pub fn knn_identify<'g, T: Real>(gallery: &'g Gallery<T>, probe: &[T]) -> Result<&'g str> {
    gallery.check_dim(probe)?;
    let mut best: Option<(T, &str)> = None;
    for (s, v) in &gallery.entries {
        let d = sq_dist(v, probe);
        if best.is_none_or(|(b, _)| d < b) {
            best = Some((d, s));
        }
    }
    best.map(|(_, s)| s).ok_or(GaitError::Empty)
}
