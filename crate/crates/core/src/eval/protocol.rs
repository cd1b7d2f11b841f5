//! Cross-verification and identification over a labelled feature set.
//!
//! Every subject is the genuine user in turn. Patterns are split per
//! subject into train and test parts; PCA is fitted on the pooled train
//! part only. Genuine probes are the subject's own test patterns, impostor
//! probes every other subject's test patterns.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::roc::{rates_at, roc_curve, session_score, FrrAtFar, RocPoint, ScoreSet, DEFAULT_FAR_LEVELS};
use crate::config::{PipelineConfig, Scheme};
use crate::error::{GaitError, Result};
use crate::features::FeatureVector;
use crate::model::{fit_pca, knn_identify, knn_verify, train_svm, Classifier, Gallery, ModelFile, PcaModel, SvmModel};
use crate::num::Real;
use crate::synth::derive_seed;

/// Indices into the input vectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    /// Subjects with fewer than two patterns.
    pub excluded: Vec<String>,
}

fn by_subject<T>(vectors: &[FeatureVector<T>]) -> BTreeMap<&str, Vec<usize>> {
    let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, v) in vectors.iter().enumerate() {
        m.entry(v.subject_id.as_str()).or_default().push(i);
    }
    m
}

/// Per-subject stratified random split. Each subject contributes
/// `round(fraction·n)` training patterns, at least one and at most `n − 1`.
pub fn split_train_test<T>(vectors: &[FeatureVector<T>], fraction: f64, seed: u64) -> Result<Split> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(GaitError::InvalidConfig(format!("train fraction {fraction} outside (0, 1)")));
    }
    let mut split = Split {
        train: Vec::new(),
        test: Vec::new(),
        excluded: Vec::new(),
    };
    for (ordinal, (subject, mut idx)) in by_subject(vectors).into_iter().enumerate() {
        let n = idx.len();
        if n < 2 {
            warn!("subject {subject} has {n} pattern(s) and is excluded from evaluation");
            split.excluded.push(subject.to_string());
            continue;
        }
        let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, ordinal as u64 + 1, 0));
        idx.shuffle(&mut rng);
        let (train, test) = idx.split_at(n_train);
        split.train.extend_from_slice(train);
        split.test.extend_from_slice(test);
    }
    split.train.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    Pattern,
    Session,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub scheme: Scheme,
    pub scenario: Scenario,
    pub roc: Vec<RocPoint>,
    pub eer: f64,
    pub eer_threshold: f64,
    pub frr_at_far: Vec<FrrAtFar>,
    /// Rates at the pattern-level EER threshold.
    pub operating_point: RocPoint,
    pub identification_accuracy: f64,
    pub n_genuine: usize,
    pub n_impostor: usize,
    pub config_digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evaluation {
    pub scheme: Scheme,
    pub pattern: EvalReport,
    pub session: EvalReport,
    pub n_subjects: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub pca_components: usize,
    pub excluded_subjects: Vec<String>,
    pub config: BTreeMap<String, String>,
    pub config_digest: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IdentificationResult {
    pub pattern_accuracy: f64,
    pub session_accuracy: f64,
}

/// Draws the SVM negatives for one genuine subject: as many patterns from
/// each other subject as the genuine subject has, without replacement.
fn sample_negatives<T: Real>(
    own: usize,
    train: &[(usize, Vec<T>)],
    genuine: usize,
    seed: u64,
) -> Vec<Vec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut per_subject: BTreeMap<usize, Vec<&Vec<T>>> = BTreeMap::new();
    for (s, v) in train {
        if *s != genuine {
            per_subject.entry(*s).or_default().push(v);
        }
    }
    let mut out = Vec::new();
    for pool in per_subject.values() {
        let k = own.min(pool.len());
        for i in index::sample(&mut rng, pool.len(), k).into_vec() {
            out.push(pool[i].clone());
        }
    }
    out
}

enum Scorer<T> {
    Knn(Gallery<T>),
    Svm(Vec<SvmModel<T>>),
}

fn fit_scorer<T: Real>(
    scheme: Scheme,
    subjects: &[String],
    train: &[(usize, Vec<T>)],
    cfg: &PipelineConfig,
) -> Result<Scorer<T>> {
    match scheme {
        Scheme::Knn => {
            let mut g = Gallery::new();
            for (s, v) in train {
                g.push(subjects[*s].clone(), v.clone())?;
            }
            Ok(Scorer::Knn(g))
        }
        Scheme::Svm => {
            let models = (0..subjects.len())
                .into_par_iter()
                .map(|i| {
                    let positives: Vec<Vec<T>> =
                        train.iter().filter(|(s, _)| *s == i).map(|(_, v)| v.clone()).collect();
                    let seed = derive_seed(cfg.seed, i as u64 + 1, 0x5EED);
                    let negatives = sample_negatives(positives.len(), train, i, seed);
                    let mut m = train_svm(subjects[i].clone(), &positives, &negatives, T::lit(cfg.svm_c))?;
                    m.seed = seed;
                    Ok(m)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Scorer::Svm(models))
        }
    }
}

impl<T: Real> Scorer<T> {
    /// Score of `probe` against every subject, in subject order.
    fn scores(&self, subjects: &[String], probe: &[T]) -> Result<Vec<f64>> {
        match self {
            Scorer::Knn(g) => subjects
                .iter()
                .map(|s| knn_verify(g, s, probe).map(Real::as_f64))
                .collect(),
            Scorer::Svm(models) => Ok(models.iter().map(|m| m.decision(probe).as_f64()).collect()),
        }
    }

    fn identify(&self, subjects: &[String], probe: &[T], scores: &[f64]) -> Result<usize> {
        match self {
            Scorer::Knn(g) => {
                let s = knn_identify(g, probe)?;
                Ok(subjects.iter().position(|x| x == s).expect("gallery subject is known"))
            }
            Scorer::Svm(_) => Ok(argmax_first(scores)),
        }
    }
}

fn argmax_first(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

fn to_report(
    scheme: Scheme,
    scenario: Scenario,
    scores: &ScoreSet,
    operating_threshold: Option<f64>,
    accuracy: f64,
    digest: &str,
) -> Result<EvalReport> {
    let roc = roc_curve(scores, &DEFAULT_FAR_LEVELS)?;
    let threshold = operating_threshold.unwrap_or(roc.eer_threshold);
    let (far, frr) = rates_at(scores, threshold);
    Ok(EvalReport {
        scheme,
        scenario,
        roc: roc.roc,
        eer: roc.eer,
        eer_threshold: roc.eer_threshold,
        frr_at_far: roc.frr_at_far,
        operating_point: RocPoint { threshold, far, frr },
        identification_accuracy: accuracy,
        n_genuine: scores.genuine.len(),
        n_impostor: scores.impostor.len(),
        config_digest: digest.to_string(),
    })
}

/// Verification and identification for `cfg.scheme` in one pass.
pub fn evaluate<T: Real>(vectors: &[FeatureVector<T>], cfg: &PipelineConfig) -> Result<Evaluation> {
    cfg.validate()?;
    let split = split_train_test(vectors, cfg.train_fraction, cfg.seed)?;
    let subjects: Vec<String> = by_subject(vectors)
        .keys()
        .filter(|s| !split.excluded.iter().any(|e| e == *s))
        .map(|s| s.to_string())
        .collect();
    if subjects.len() < 2 {
        return Err(GaitError::InsufficientSubjects(subjects.len()));
    }
    let ordinal = |s: &str| subjects.iter().position(|x| x == s).expect("subject listed");

    let train_rows: Vec<Vec<T>> = split.train.iter().map(|&i| vectors[i].values.clone()).collect();
    let pca = fit_pca(&train_rows, T::lit(cfg.pca_variance))?;
    let train: Vec<(usize, Vec<T>)> = split
        .train
        .iter()
        .zip(&train_rows)
        .map(|(&i, row)| Ok((ordinal(&vectors[i].subject_id), pca.project(row)?)))
        .collect::<Result<_>>()?;
    let scorer = fit_scorer(cfg.scheme, &subjects, &train, cfg)?;

    let probes: Vec<(usize, Vec<T>)> = split
        .test
        .iter()
        .map(|&i| Ok((ordinal(&vectors[i].subject_id), pca.project(&vectors[i].values)?)))
        .collect::<Result<_>>()?;
    let scored: Vec<(Vec<f64>, usize)> = probes
        .par_iter()
        .map(|(_, p)| {
            let s = scorer.scores(&subjects, p)?;
            let id = scorer.identify(&subjects, p, &s)?;
            Ok((s, id))
        })
        .collect::<Result<_>>()?;

    let mut patterns = ScoreSet::default();
    let mut correct = 0usize;
    for ((owner, _), (scores, predicted)) in probes.iter().zip(&scored) {
        for (claimed, &s) in scores.iter().enumerate() {
            if claimed == *owner {
                patterns.genuine.push(s);
            } else {
                patterns.impostor.push(s);
            }
        }
        correct += usize::from(predicted == owner);
    }

    // Sessions in order of first appearance among the test probes.
    let mut sessions: Vec<((usize, &str), Vec<usize>)> = Vec::new();
    for (k, &i) in split.test.iter().enumerate() {
        let key = (probes[k].0, vectors[i].session_id.as_str());
        match sessions.iter_mut().find(|(s, _)| *s == key) {
            Some((_, members)) => members.push(k),
            None => sessions.push((key, vec![k])),
        }
    }
    let mut session_scores = ScoreSet::default();
    let mut session_correct = 0usize;
    for ((owner, _), members) in &sessions {
        for claimed in 0..subjects.len() {
            let s: Vec<f64> = members.iter().map(|&k| scored[k].0[claimed]).collect();
            let score = session_score(&s).expect("non-empty session");
            if claimed == *owner {
                session_scores.genuine.push(score);
            } else {
                session_scores.impostor.push(score);
            }
        }
        let mut votes = vec![0usize; subjects.len()];
        members.iter().for_each(|&k| votes[scored[k].1] += 1);
        let winner = argmax_first(&votes.iter().map(|&v| v as f64).collect::<Vec<_>>());
        session_correct += usize::from(winner == *owner);
    }

    let digest = cfg.digest();
    let pattern = to_report(
        cfg.scheme,
        Scenario::Pattern,
        &patterns,
        None,
        correct as f64 / probes.len() as f64,
        &digest,
    )?;
    let session = to_report(
        cfg.scheme,
        Scenario::Session,
        &session_scores,
        Some(pattern.eer_threshold),
        session_correct as f64 / sessions.len() as f64,
        &digest,
    )?;
    Ok(Evaluation {
        scheme: cfg.scheme,
        pattern,
        session,
        n_subjects: subjects.len(),
        n_train: split.train.len(),
        n_test: split.test.len(),
        pca_components: pca.k(),
        excluded_subjects: split.excluded,
        config: crate::config::KEYS
            .iter()
            .map(|k| (k.to_string(), cfg.get(k).expect("known key")))
            .collect(),
        config_digest: digest,
    })
}

/// Pattern- and session-based verification reports.
pub fn evaluate_verification<T: Real>(
    vectors: &[FeatureVector<T>],
    cfg: &PipelineConfig,
) -> Result<(EvalReport, EvalReport)> {
    let e = evaluate(vectors, cfg)?;
    Ok((e.pattern, e.session))
}

/// Pattern- and session-based identification accuracy. The SVM scheme
/// predicts the subject whose model gives the largest margin.
pub fn evaluate_identification<T: Real>(
    vectors: &[FeatureVector<T>],
    cfg: &PipelineConfig,
) -> Result<IdentificationResult> {
    let e = evaluate(vectors, cfg)?;
    Ok(IdentificationResult {
        pattern_accuracy: e.pattern.identification_accuracy,
        session_accuracy: e.session.identification_accuracy,
    })
}

/// Fits PCA and the configured classifier on every vector given.
pub fn fit_model<T: Real>(vectors: &[FeatureVector<T>], cfg: &PipelineConfig) -> Result<ModelFile<T>> {
    cfg.validate()?;
    let subjects: Vec<String> = by_subject(vectors).keys().map(|s| s.to_string()).collect();
    if subjects.len() < 2 {
        return Err(GaitError::InsufficientSubjects(subjects.len()));
    }
    let rows: Vec<Vec<T>> = vectors.iter().map(|v| v.values.clone()).collect();
    let pca: PcaModel<T> = fit_pca(&rows, T::lit(cfg.pca_variance))?;
    let train: Vec<(usize, Vec<T>)> = vectors
        .iter()
        .zip(&rows)
        .map(|(v, r)| {
            let s = subjects.iter().position(|x| *x == v.subject_id).expect("subject listed");
            Ok((s, pca.project(r)?))
        })
        .collect::<Result<_>>()?;
    let classifier = match fit_scorer(cfg.scheme, &subjects, &train, cfg)? {
        Scorer::Knn(g) => Classifier::Gallery(g),
        Scorer::Svm(m) => Classifier::Svm(m),
    };
    Ok(ModelFile { pca, classifier })
}
