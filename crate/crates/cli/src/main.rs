//! `gaitverify` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gaitverify::eval::{disorientation_ab, evaluate, fit_model, write_roc_csv};
use gaitverify::features::{read_features_csv, write_features_csv, FeatureVector};
use gaitverify::ingest::{parse_log, RawSession, LOG_HEADER};
use gaitverify::model::write_model;
use gaitverify::pipeline::process_sessions;
use gaitverify::segmentation::write_starts_csv;
use gaitverify::synth::{gen_cohort, write_cohort, CohortConfig, OrientationMode};
use gaitverify::{GaitError, PipelineConfig};
use log::{info, warn};
use rayon::prelude::*;

#[derive(Parser)]
#[command(name = "gaitverify", version, about = "Orientation-invariant gait verification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort of session logs with truth sidecars.
    Synth(SynthArgs),
    /// Turn session logs into a features CSV.
    Pipeline(PipelineArgs),
    /// Fit PCA and per-subject classifiers and write a model file.
    Train(TrainArgs),
    /// Cross-verification and identification report.
    Eval(EvalArgs),
}

/// Pipeline parameters. Flags override the config file, which overrides
/// the defaults.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// `key=value` file; `#` starts a comment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    rate_hz: Option<String>,
    #[arg(long)]
    wavelet_levels: Option<String>,
    #[arg(long)]
    tau: Option<String>,
    #[arg(long)]
    epsilon_fraction: Option<String>,
    #[arg(long)]
    smoothing_window: Option<String>,
    #[arg(long)]
    min_lag_s: Option<String>,
    #[arg(long)]
    min_prominence: Option<String>,
    #[arg(long)]
    n_s: Option<String>,
    #[arg(long)]
    freq_bin_offset: Option<String>,
    #[arg(long)]
    pca_variance: Option<String>,
    #[arg(long)]
    svm_c: Option<String>,
    #[arg(long)]
    train_fraction: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// knn or svm.
    #[arg(long)]
    scheme: Option<String>,
    /// earth, device or magnitude.
    #[arg(long)]
    channels: Option<String>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    subjects: usize,
    #[arg(long, default_value_t = 4)]
    sessions: usize,
    #[arg(long, default_value_t = 40.0)]
    duration: f64,
    /// fixed, drifting or per_session_random.
    #[arg(long, default_value = "per_session_random")]
    orientation: OrientationMode,
    /// Degrees per second, for drifting orientations.
    #[arg(long, default_value_t = 2.0)]
    drift_rate: f64,
    /// Noise standard deviation, m/s².
    #[arg(long, default_value_t = 0.2)]
    noise: f64,
}

#[derive(Args)]
struct PipelineArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Session logs named `<subject>_<session>.csv`.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Also write each session's signal and detected cycle starts here.
    #[arg(long)]
    dump_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Session logs or features CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Session logs or features CSV files.
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    /// JSON report path.
    #[arg(long)]
    out: PathBuf,
    /// Pattern-level ROC as CSV.
    #[arg(long)]
    roc: Option<PathBuf>,
    /// Compare device-axis, Earth-frame and magnitude-only channels on the
    /// same sessions (needs session logs).
    #[arg(long)]
    ab_disorientation: bool,
}

struct Failure {
    code: u8,
    msg: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: 1, msg: msg.into() }
    }

    fn data(msg: impl Into<String>) -> Self {
        Failure { code: 2, msg: msg.into() }
    }
}

impl From<GaitError> for Failure {
    fn from(e: GaitError) -> Self {
        match e {
            GaitError::InvalidConfig(_) => Failure::usage(e.to_string()),
            _ => Failure::data(e.to_string()),
        }
    }
}

type Outcome<V> = Result<V, Failure>;

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Outcome<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| io_failure(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| io_failure(path, e))
}

fn resolve(args: &ConfigArgs) -> Outcome<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)
            .map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
    }
    let flags = [
        ("rate_hz", &args.rate_hz),
        ("wavelet_levels", &args.wavelet_levels),
        ("tau", &args.tau),
        ("epsilon_fraction", &args.epsilon_fraction),
        ("smoothing_window", &args.smoothing_window),
        ("min_lag_s", &args.min_lag_s),
        ("min_prominence", &args.min_prominence),
        ("n_s", &args.n_s),
        ("freq_bin_offset", &args.freq_bin_offset),
        ("pca_variance", &args.pca_variance),
        ("svm_c", &args.svm_c),
        ("train_fraction", &args.train_fraction),
        ("seed", &args.seed),
        ("scheme", &args.scheme),
        ("channels", &args.channels),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, v).map_err(|e| Failure::usage(e.to_string()))?;
        }
    }
    cfg.validate().map_err(|e| Failure::usage(e.to_string()))?;
    if let Some(n) = args.jobs {
        if n == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure { code: 3, msg: e.to_string() })?;
    }
    eprint!("# resolved config\n{}", cfg.to_text());
    Ok(cfg)
}

/// `<subject>_<session>` from the file stem.
fn ids_from_path(path: &Path) -> Outcome<(String, String)> {
    let stem = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| Failure::data(format!("{}: file name is not UTF-8", path.display())))?;
    match stem.split_once('_') {
        Some((subject, session)) if !subject.is_empty() && !session.is_empty() => {
            Ok((subject.to_string(), session.to_string()))
        }
        _ => Err(Failure::data(format!(
            "{}: expected a file name of the form <subject>_<session>.csv",
            path.display()
        ))),
    }
}

fn load_log(path: &Path) -> Outcome<RawSession<f64>> {
    let (subject, session) = ids_from_path(path)?;
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    parse_log(BufReader::new(file), subject, session).map_err(|e| Failure::data(format!("{}: {e}", path.display())))
}

/// Parses every log, skipping (with a warning) the ones that fail.
fn load_logs(paths: &[PathBuf]) -> Outcome<Vec<RawSession<f64>>> {
    let loaded: Vec<Outcome<RawSession<f64>>> = paths.par_iter().map(|p| load_log(p)).collect();
    let mut sessions = Vec::new();
    for r in loaded {
        match r {
            Ok(s) => sessions.push(s),
            Err(f) => warn!("skipped {}", f.msg),
        }
    }
    if sessions.is_empty() {
        return Err(Failure::data("no input session could be read"));
    }
    Ok(sessions)
}

fn is_log(path: &Path) -> Outcome<bool> {
    let file = File::open(path).map_err(|e| io_failure(path, e))?;
    let mut first = String::new();
    BufReader::new(file)
        .read_line(&mut first)
        .map_err(|e| io_failure(path, e))?;
    Ok(first.trim_start().starts_with(LOG_HEADER[0]))
}

/// Feature vectors from session logs, or read directly from features CSVs.
fn load_vectors(paths: &[PathBuf], cfg: &PipelineConfig) -> Outcome<Vec<FeatureVector<f64>>> {
    let mut logs = Vec::new();
    let mut vectors = Vec::new();
    for p in paths {
        if is_log(p)? {
            logs.push(p.clone());
        } else {
            let file = File::open(p).map_err(|e| io_failure(p, e))?;
            match read_features_csv(BufReader::new(file)) {
                Ok(v) => vectors.extend(v),
                Err(e) => warn!("skipped {}: {e}", p.display()),
            }
        }
    }
    if !logs.is_empty() {
        let sessions = load_logs(&logs)?;
        for out in process_sessions(&sessions, cfg) {
            match out {
                Ok(o) => vectors.extend(o.vectors),
                Err(e) => warn!("session skipped: {e}"),
            }
        }
    }
    if vectors.is_empty() {
        return Err(Failure::data("no feature vectors"));
    }
    Ok(vectors)
}

fn cmd_synth(args: &SynthArgs) -> Outcome<()> {
    let cfg = resolve(&args.config)?;
    let cohort_cfg = CohortConfig {
        n_subjects: args.subjects,
        sessions_per_subject: args.sessions,
        duration_s: args.duration,
        rate_hz: cfg.rate_hz,
        seed: cfg.seed,
        orientation: args.orientation,
        drift_rate: args.drift_rate,
        noise_sigma: args.noise,
        ..CohortConfig::default()
    };
    let cohort = gen_cohort(&cohort_cfg).map_err(|e| match e {
        GaitError::InsufficientSubjects(_) => Failure::usage(e.to_string()),
        other => other.into(),
    })?;
    let written = write_cohort(&cohort, &cohort_cfg, &args.out)?;
    eprintln!("wrote {} sessions to {}", written.len(), args.out.display());
    Ok(())
}

fn cmd_pipeline(args: &PipelineArgs) -> Outcome<()> {
    let cfg = resolve(&args.config)?;
    let sessions = load_logs(&args.inputs)?;
    let outputs = process_sessions(&sessions, &cfg);
    let mut vectors = Vec::new();
    let mut processed = 0;
    for (s, out) in sessions.iter().zip(outputs) {
        let out = match out {
            Ok(o) => o,
            Err(e) => {
                warn!("session {}_{} skipped: {e}", s.subject_id, s.session_id);
                continue;
            }
        };
        processed += 1;
        eprintln!(
            "{}_{}: {} cycles, {} patterns",
            out.subject_id,
            out.session_id,
            out.cycles(),
            out.vectors.len()
        );
        if let Some(dir) = &args.dump_dir {
            let stem = format!("{}_{}", out.subject_id, out.session_id);
            let path = dir.join(format!("{stem}.signal.csv"));
            out.signal.write_csv(create(&path)?)?;
            if let Some(starts) = &out.starts {
                let path = dir.join(format!("{stem}.starts.csv"));
                write_starts_csv(starts, &out.signal, create(&path)?)?;
            }
        }
        vectors.extend(out.vectors);
    }
    if processed == 0 {
        return Err(Failure::data("every session failed"));
    }
    write_features_csv(&vectors, create(&args.out)?)?;
    info!("{} feature vectors written to {}", vectors.len(), args.out.display());
    Ok(())
}

fn cmd_train(args: &TrainArgs) -> Outcome<()> {
    let cfg = resolve(&args.config)?;
    let vectors = load_vectors(&args.inputs, &cfg)?;
    let model = fit_model(&vectors, &cfg)?;
    let mut out = create(&args.out)?;
    write_model(&model, &mut out)?;
    out.flush().map_err(|e| io_failure(&args.out, e))?;
    eprintln!("model with {} components written to {}", model.pca.k(), args.out.display());
    Ok(())
}

fn write_json<S: serde::Serialize>(value: &S, path: &Path) -> Outcome<()> {
    let mut out = create(path)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| Failure { code: 3, msg: e.to_string() })?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| io_failure(path, e))
}

fn cmd_eval(args: &EvalArgs) -> Outcome<()> {
    let cfg = resolve(&args.config)?;
    if args.ab_disorientation {
        let mut logs = Vec::new();
        for p in &args.inputs {
            if is_log(p)? {
                logs.push(p.clone());
            } else {
                warn!("skipped {}: --ab-disorientation reads session logs only", p.display());
            }
        }
        if logs.is_empty() {
            return Err(Failure::usage("--ab-disorientation needs session logs"));
        }
        let sessions = load_logs(&logs)?;
        let ab = disorientation_ab(&sessions, &cfg)?;
        eprintln!(
            "pattern EER: device {:.4}, earth {:.4}, magnitude {:.4}",
            ab.device.pattern.eer, ab.earth.pattern.eer, ab.magnitude.pattern.eer
        );
        write_json(&ab, &args.out)?;
        if let Some(path) = &args.roc {
            write_roc_csv(&ab.earth.pattern.roc, create(path)?)?;
        }
        return Ok(());
    }
    let vectors = load_vectors(&args.inputs, &cfg)?;
    let report = evaluate(&vectors, &cfg)?;
    eprintln!(
        "{}: pattern EER {:.4}, session EER {:.4}, identification {:.4} (pattern) {:.4} (session)",
        report.scheme,
        report.pattern.eer,
        report.session.eer,
        report.pattern.identification_accuracy,
        report.session.identification_accuracy
    );
    write_json(&report, &args.out)?;
    if let Some(path) = &args.roc {
        write_roc_csv(&report.pattern.roc, create(path)?)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Outcome<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Pipeline(a) => cmd_pipeline(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| run(&cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(f)) => {
            eprintln!("error: {}", f.msg);
            ExitCode::from(f.code)
        }
        Err(_) => ExitCode::from(3),
    }
}
