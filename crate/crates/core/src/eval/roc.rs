//! ROC curves, equal error rate and FRR at fixed FAR levels.

use serde::Serialize;

use crate::error::{GaitError, Result};

/// Verification scores; higher means more likely genuine.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScoreSet {
    pub genuine: Vec<f64>,
    pub impostor: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub far: f64,
    pub frr: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrrAtFar {
    pub far_level: f64,
    pub frr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RocSummary {
    /// One point per distinct score plus a final threshold above every
    /// score, in increasing threshold order.
    pub roc: Vec<RocPoint>,
    pub eer: f64,
    /// Threshold at which the interpolated FAR and FRR meet.
    pub eer_threshold: f64,
    pub frr_at_far: Vec<FrrAtFar>,
}

/// FAR/FRR reporting levels always included in reports.
pub const DEFAULT_FAR_LEVELS: [f64; 3] = [0.001, 0.01, 0.1];

fn check(scores: &[f64], what: &str) -> Result<()> {
    if scores.is_empty() {
        return Err(GaitError::InvalidConfig(format!("no {what} scores")));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(GaitError::NonFinite(format!("{what} scores")));
    }
    Ok(())
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Rates at threshold θ: FAR counts impostor scores `≥ θ`, FRR genuine
/// scores `< θ`.
pub fn rates_at(scores: &ScoreSet, threshold: f64) -> (f64, f64) {
    let far = scores.impostor.iter().filter(|&&s| s >= threshold).count() as f64 / scores.impostor.len() as f64;
    let frr = scores.genuine.iter().filter(|&&s| s < threshold).count() as f64 / scores.genuine.len() as f64;
    (far, frr)
}

pub fn roc_curve(scores: &ScoreSet, far_levels: &[f64]) -> Result<RocSummary> {
    check(&scores.genuine, "genuine")?;
    check(&scores.impostor, "impostor")?;
    let gen = sorted(&scores.genuine);
    let imp = sorted(&scores.impostor);

    let mut thresholds: Vec<f64> = gen.iter().chain(&imp).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    let top = *thresholds.last().expect("non-empty");
    thresholds.push(top + 1.0);

    let (ng, ni) = (gen.len() as f64, imp.len() as f64);
    let roc: Vec<RocPoint> = thresholds
        .iter()
        .map(|&t| {
            let below_g = gen.partition_point(|&s| s < t);
            let below_i = imp.partition_point(|&s| s < t);
            RocPoint {
                threshold: t,
                far: (imp.len() - below_i) as f64 / ni,
                frr: below_g as f64 / ng,
            }
        })
        .collect();

    // FAR − FRR starts at 1 and ends at −1; the EER sits at its first sign
    // change.
    let diff = |p: &RocPoint| p.far - p.frr;
    let i = roc.iter().position(|p| diff(p) <= 0.0).expect("last point has FAR 0, FRR 1");
    let (eer, eer_threshold) = if diff(&roc[i]) == 0.0 || i == 0 {
        (roc[i].far, roc[i].threshold)
    } else {
        let (a, b) = (&roc[i - 1], &roc[i]);
        let f = diff(a) / (diff(a) - diff(b));
        (a.far + f * (b.far - a.far), a.threshold + f * (b.threshold - a.threshold))
    };

    let frr_at_far = far_levels
        .iter()
        .map(|&level| FrrAtFar {
            far_level: level,
            frr: roc.iter().find(|p| p.far <= level).map_or(1.0, |p| p.frr),
        })
        .collect();

    Ok(RocSummary {
        roc,
        eer,
        eer_threshold,
        frr_at_far,
    })
}

/// Majority vote over pattern decisions; a tie rejects.
pub fn verify_session(pattern_decisions: &[bool]) -> bool {
    let accepted = pattern_decisions.iter().filter(|&&d| d).count();
    2 * accepted > pattern_decisions.len()
}

/// Session score equivalent to majority voting at every threshold: the
/// `(⌊n/2⌋ + 1)`-th largest pattern score. A session is accepted at θ by
/// majority vote exactly when this score is `≥ θ`.
pub fn session_score(pattern_scores: &[f64]) -> Option<f64> {
    if pattern_scores.is_empty() {
        return None;
    }
    let mut s = pattern_scores.to_vec();
    s.sort_by(|a, b| b.total_cmp(a));
    Some(s[pattern_scores.len() / 2])
}

/// Writes ROC points as CSV `threshold,far,frr`.
pub fn write_roc_csv<W: std::io::Write>(roc: &[RocPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["threshold", "far", "frr"])?;
    for p in roc {
        w.write_record([p.threshold.to_string(), p.far.to_string(), p.frr.to_string()])?;
    }
    w.flush().map_err(|e| GaitError::io("<roc writer>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(g: &[f64], i: &[f64]) -> ScoreSet {
        ScoreSet {
            genuine: g.to_vec(),
            impostor: i.to_vec(),
        }
    }

    /// Brute force: every candidate threshold evaluated by direct counting,
    /// the EER taken between the last point with FAR > FRR and the next.
    fn oracle(s: &ScoreSet) -> (Vec<RocPoint>, f64) {
        let mut cands: Vec<f64> = Vec::new();
        for &x in s.genuine.iter().chain(&s.impostor) {
            if !cands.contains(&x) {
                cands.push(x);
            }
        }
        let max = cands.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        cands.push(max + 1.0);
        cands.sort_by(f64::total_cmp);
        let pts: Vec<RocPoint> = cands
            .iter()
            .map(|&t| {
                let (far, frr) = rates_at(s, t);
                RocPoint { threshold: t, far, frr }
            })
            .collect();
        let mut eer = f64::NAN;
        for k in 0..pts.len() {
            let d = pts[k].far - pts[k].frr;
            if d <= 0.0 {
                eer = if d == 0.0 || k == 0 {
                    pts[k].far
                } else {
                    let dp = pts[k - 1].far - pts[k - 1].frr;
                    let f = dp / (dp - d);
                    pts[k - 1].far + f * (pts[k].far - pts[k - 1].far)
                };
                break;
            }
        }
        (pts, eer)
    }

    #[test]
    fn separated_scores_have_zero_eer() {
        let r = roc_curve(&set(&[1.0, 1.0], &[-1.0, -1.0, -1.0]), &[0.01]).unwrap();
        assert_eq!(r.eer, 0.0);
        assert_eq!(r.frr_at_far[0].frr, 0.0);
    }

    #[test]
    fn identical_distributions_have_half_eer() {
        let x = [0.3, 0.1, 0.7, 0.7, 0.2];
        assert_eq!(roc_curve(&set(&x, &x), &[]).unwrap().eer, 0.5);
        assert_eq!(roc_curve(&set(&[2.0], &[2.0]), &[]).unwrap().eer, 0.5);
    }

    #[test]
    fn hand_example_matches_oracle() {
        let s = set(&[0.9, 0.8, 0.2], &[0.7, 0.1, 0.05]);
        let r = roc_curve(&s, &DEFAULT_FAR_LEVELS).unwrap();
        let (pts, eer) = oracle(&s);
        assert_eq!(r.roc, pts);
        assert_eq!(r.eer, eer);
        assert!((r.eer - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_scores_rejected() {
        assert!(roc_curve(&set(&[], &[1.0]), &[]).is_err());
        assert!(roc_curve(&set(&[1.0], &[]), &[]).is_err());
        assert!(roc_curve(&set(&[f64::NAN], &[1.0]), &[]).is_err());
    }

    #[test]
    fn majority_vote() {
        assert!(verify_session(&[true, true, false]));
        assert!(!verify_session(&[true, false]));
        assert!(!verify_session(&[false; 5]));
        assert!(!verify_session(&[]));
    }

    #[test]
    fn frr_at_far_uses_lowest_admissible_threshold() {
        let s = set(&[0.5, 0.6, 0.9, 0.95], &[0.1, 0.2, 0.3, 0.55]);
        let r = roc_curve(&s, &[0.0, 0.25, 1.0]).unwrap();
        let frr: Vec<f64> = r.frr_at_far.iter().map(|x| x.frr).collect();
        assert_eq!(frr, vec![0.25, 0.0, 0.0]);
    }

    fn scores() -> impl Strategy<Value = ScoreSet> {
        // Coarse values so ties are common.
        let v = proptest::collection::vec((0i32..20).prop_map(|x| x as f64 / 4.0), 1..26);
        (v.clone(), v).prop_map(|(g, i)| ScoreSet { genuine: g, impostor: i })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(512))]

        #[test]
        fn agrees_with_exhaustive_oracle(s in scores()) {
            let r = roc_curve(&s, &DEFAULT_FAR_LEVELS).unwrap();
            let (pts, eer) = oracle(&s);
            prop_assert_eq!(&r.roc, &pts);
            prop_assert_eq!(r.eer, eer);
        }

        #[test]
        fn monotone_and_bracketed(s in scores()) {
            let r = roc_curve(&s, &[]).unwrap();
            for w in r.roc.windows(2) {
                prop_assert!(w[1].far <= w[0].far && w[1].frr >= w[0].frr);
            }
            let k = r.roc.iter().position(|p| p.far <= p.frr).unwrap();
            let lo = r.roc[k].far.min(r.roc[k].frr).min(if k > 0 { r.roc[k - 1].frr } else { 1.0 });
            let hi = r.roc[k].frr.max(if k > 0 { r.roc[k - 1].far } else { 0.0 });
            prop_assert!(r.eer >= lo - 1e-12 && r.eer <= hi + 1e-12);
        }

        #[test]
        fn session_score_equals_majority(v in proptest::collection::vec(-5.0f64..5.0, 1..12), t in -5.0f64..5.0) {
            let decisions: Vec<bool> = v.iter().map(|&s| s >= t).collect();
            prop_assert_eq!(session_score(&v).unwrap() >= t, verify_session(&decisions));
        }
    }
}
