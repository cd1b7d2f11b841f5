//! Verification and identification protocols and their metrics.

mod ab;
mod protocol;
mod roc;

pub use ab::{disorientation_ab, evaluate_mode, AbReport};
pub use protocol::{
    evaluate, evaluate_identification, evaluate_verification, fit_model, split_train_test, EvalReport, Evaluation,
    IdentificationResult, Scenario, Split,
};
pub use roc::{
    rates_at, roc_curve, session_score, verify_session, write_roc_csv, FrrAtFar, RocPoint, RocSummary, ScoreSet,
    DEFAULT_FAR_LEVELS,
};
