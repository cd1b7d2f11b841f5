use std::fs::File;
use std::io::BufReader;

use gaitverify::eval::{evaluate, fit_model};
use gaitverify::features::{read_features_csv, write_features_csv, FEATURE_LEN};
use gaitverify::ingest::{parse_log, RawSession, SensorRecord};
use gaitverify::model::{read_model, write_model, Classifier};
use gaitverify::pipeline::feature_vectors;
use gaitverify::synth::{gen_cohort, write_cohort, CohortConfig};
use gaitverify::{FeatureVector32, PipelineConfig, RawSession32, Scheme};

fn small_cohort() -> (CohortConfig, gaitverify::synth::Cohort) {
    let cfg = CohortConfig {
        n_subjects: 4,
        sessions_per_subject: 2,
        duration_s: 30.0,
        ..CohortConfig::default()
    };
    let c = gen_cohort(&cfg).unwrap();
    (cfg, c)
}

fn to_f32(s: &RawSession<f64>) -> RawSession32 {
    let records = s
        .records
        .iter()
        .map(|r| SensorRecord {
            t: r.t as f32,
            kind: r.kind,
            v: r.v.map(|x| x as f32),
        })
        .collect();
    RawSession::new(s.subject_id.clone(), s.session_id.clone(), records).unwrap()
}

#[test]
fn written_cohort_reads_back_and_evaluates() {
    let (cfg, cohort) = small_cohort();
    let dir = tempfile::tempdir().unwrap();
    let logs = write_cohort(&cohort, &cfg, dir.path()).unwrap();
    assert_eq!(logs.len(), 8);

    let sessions: Vec<RawSession<f64>> = logs
        .iter()
        .zip(&cohort.sessions)
        .map(|(p, s)| {
            let parsed = parse_log(BufReader::new(File::open(p).unwrap()), "x", "y").unwrap();
            assert_eq!(parsed.records, s.session.records);
            RawSession { subject_id: s.session.subject_id.clone(), session_id: s.session.session_id.clone(), ..parsed }
        })
        .collect();

    let truth = std::fs::read_to_string(dir.path().join("S01_01.truth.csv")).unwrap();
    assert_eq!(truth.lines().next().unwrap(), "session_id,cycle_start_index");
    assert_eq!(truth.lines().count() - 1, cohort.sessions[0].earth.truth.len());

    let pcfg = PipelineConfig::default();
    let vectors = feature_vectors(&sessions, &pcfg).unwrap();
    let e = evaluate(&vectors, &pcfg).unwrap();
    assert_eq!(e.n_subjects, 4);
    assert!(e.pattern.eer <= 0.1, "{}", e.pattern.eer);
}

#[test]
fn feature_csv_round_trips_exactly() {
    let (_, cohort) = small_cohort();
    let sessions: Vec<_> = cohort.sessions.iter().take(2).map(|s| s.session.clone()).collect();
    let vectors = feature_vectors(&sessions, &PipelineConfig::default()).unwrap();
    let mut buf = Vec::new();
    write_features_csv(&vectors, &mut buf).unwrap();
    let back = read_features_csv::<f64, _>(buf.as_slice()).unwrap();
    assert_eq!(back, vectors);
}

#[test]
fn model_file_reproduces_scores() {
    let (_, cohort) = small_cohort();
    let sessions: Vec<_> = cohort.sessions.iter().map(|s| s.session.clone()).collect();
    let cfg = PipelineConfig::default();
    let vectors = feature_vectors(&sessions, &cfg).unwrap();
    for scheme in [Scheme::Svm, Scheme::Knn] {
        let model = fit_model(&vectors, &PipelineConfig { scheme, ..cfg.clone() }).unwrap();
        let mut buf = Vec::new();
        write_model(&model, &mut buf).unwrap();
        let back = read_model::<f64, _>(buf.as_slice()).unwrap();
        assert_eq!(back, model);
        if let Classifier::Svm(users) = &back.classifier {
            let y = back.pca.project(&vectors[0].values).unwrap();
            let own = users.iter().find(|u| u.subject_id == vectors[0].subject_id).unwrap();
            assert!(own.decision(&y) > 0.0);
        }
    }
}

#[test]
fn single_precision_end_to_end() {
    let (_, cohort) = small_cohort();
    let sessions: Vec<RawSession32> = cohort.sessions.iter().map(|s| to_f32(&s.session)).collect();
    let cfg = PipelineConfig::default();
    let vectors: Vec<FeatureVector32> = feature_vectors(&sessions, &cfg).unwrap();
    assert!(vectors.iter().all(|v| v.values.len() == FEATURE_LEN));

    let e32 = evaluate(&vectors, &cfg).unwrap();
    let sessions64: Vec<_> = cohort.sessions.iter().map(|s| s.session.clone()).collect();
    let e64 = evaluate(&feature_vectors(&sessions64, &cfg).unwrap(), &cfg).unwrap();
    assert!(e32.pattern.eer <= 0.1, "{}", e32.pattern.eer);
    assert!((e32.pattern.eer - e64.pattern.eer).abs() <= 0.05);
    assert_eq!(e32.session.identification_accuracy, e64.session.identification_accuracy);
}
