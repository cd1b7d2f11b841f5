//! Synthetic gait cohorts with known cycle starts and orientations.
//!
//! The vertical channel of one gait cycle of period T is
//!
//! ```text
//! z(t) = −a₁ cos ωt − a₂ cos 2ωt + Σₖ₌₃ bₖ cos(kωt + φₖ),   ω = 2π/T
//! a₁ = D(1 − s)/2,   a₂ = D(1 + s)/2
//! ```
//!
//! so the same-side heel strike at t = 0 reaches −D and the off-side strike
//! half a cycle later reaches −sD. The horizontal acceleration is a separate
//! harmonic sum split between X and Y by the subject's heading.

use std::f64::consts::PI;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::earth::rotation_matrix;
use crate::error::{GaitError, Result};
use crate::ingest::{write_log, RawSession, SensorKind, SensorRecord, Vec3};
use crate::num::Real;

pub const GRAVITY: f64 = 9.81;

/// Mixes a master seed with two indices into an independent stream seed.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    let mut z = master ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ b.wrapping_mul(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubjectParams {
    /// Gait-cycle duration in seconds.
    pub cycle_s: f64,
    /// Depth of the same-side heel strike, m/s².
    pub depth: f64,
    /// Off-side over same-side heel-strike depth, in [0, 1].
    pub step_asymmetry: f64,
    /// Vertical harmonics from the third up, as (amplitude, phase).
    pub harmonics_z: Vec<(f64, f64)>,
    /// Horizontal harmonics from the fundamental up, as (amplitude, phase).
    pub harmonics_h: Vec<(f64, f64)>,
    /// Direction of horizontal motion in the Earth XY plane, radians.
    pub heading: f64,
    pub noise_sigma: f64,
    /// Time of the first same-side heel strike, seconds.
    pub phase_s: f64,
    pub seed: u64,
}

impl SubjectParams {
    fn validate(&self) -> Result<()> {
        let amps_ok = self
            .harmonics_z
            .iter()
            .chain(&self.harmonics_h)
            .all(|&(a, p)| a >= 0.0 && a.is_finite() && p.is_finite());
        if !(self.cycle_s > 0.0 && self.depth >= 0.0 && amps_ok && self.noise_sigma >= 0.0)
            || !(0.0..=1.0).contains(&self.step_asymmetry)
            || !self.heading.is_finite()
            || !(self.phase_s >= 0.0)
        {
            return Err(GaitError::InvalidConfig(format!("invalid subject parameters {self:?}")));
        }
        Ok(())
    }

    /// Noise-free vertical acceleration at time `t` seconds.
    pub fn vertical(&self, t: f64) -> f64 {
        let w = 2.0 * PI / self.cycle_s * (t - self.phase_s);
        let a1 = self.depth * (1.0 - self.step_asymmetry) / 2.0;
        let a2 = self.depth * (1.0 + self.step_asymmetry) / 2.0;
        let extra: f64 = self
            .harmonics_z
            .iter()
            .enumerate()
            .map(|(i, &(b, phi))| b * ((i + 3) as f64 * w + phi).cos())
            .sum();
        -a1 * w.cos() - a2 * (2.0 * w).cos() + extra
    }

    /// Noise-free horizontal acceleration along the heading.
    pub fn horizontal(&self, t: f64) -> f64 {
        let w = 2.0 * PI / self.cycle_s * (t - self.phase_s);
        self.harmonics_h
            .iter()
            .enumerate()
            .map(|(i, &(b, phi))| b * ((i + 1) as f64 * w + phi).cos())
            .sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EarthGait {
    pub samples: Vec<Vec3<f64>>,
    /// Sample index of every same-side heel strike that begins a complete
    /// cycle.
    pub truth: Vec<usize>,
}

/// Earth-frame acceleration (gravity excluded) sampled at `rate_hz`.
pub fn gen_earth_gait(params: &SubjectParams, duration_s: f64, rate_hz: f64) -> Result<EarthGait> {
    params.validate()?;
    if !(rate_hz > 0.0) || !(duration_s >= 2.0 * params.cycle_s) {
        return Err(GaitError::InvalidConfig(format!(
            "need duration >= 2 cycles and a positive rate (duration {duration_s} s, cycle {} s, rate {rate_hz} Hz)",
            params.cycle_s
        )));
    }
    let n = (duration_s * rate_hz + 1e-9).floor() as usize;
    let dt = 1.0 / rate_hz;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let noise = Normal::new(0.0, params.noise_sigma).map_err(|e| GaitError::InvalidConfig(e.to_string()))?;
    let (sh, ch) = params.heading.sin_cos();

    let clean_z: Vec<f64> = (0..n).map(|i| params.vertical(i as f64 * dt)).collect();
    let samples = (0..n)
        .map(|i| {
            let t = i as f64 * dt;
            let h = params.horizontal(t);
            [
                h * ch + noise.sample(&mut rng),
                h * sh + noise.sample(&mut rng),
                clean_z[i] + noise.sample(&mut rng),
            ]
        })
        .collect();

    let mut truth = Vec::new();
    for k in 0.. {
        let start = params.phase_s + k as f64 * params.cycle_s;
        if start + params.cycle_s > duration_s + 1e-9 {
            break;
        }
        let nominal = (start * rate_hz).round() as usize;
        let lo = nominal.saturating_sub(3);
        let hi = (nominal + 3).min(n - 1);
        let best = (lo..=hi)
            .min_by(|&a, &b| clean_z[a].total_cmp(&clean_z[b]))
            .expect("non-empty window");
        truth.push(best);
    }
    Ok(EarthGait { samples, truth })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrientationMode {
    Fixed,
    Drifting,
    PerSessionRandom,
}

impl std::str::FromStr for OrientationMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fixed" => Ok(OrientationMode::Fixed),
            "drifting" => Ok(OrientationMode::Drifting),
            "per_session_random" => Ok(OrientationMode::PerSessionRandom),
            other => Err(format!(
                "unknown orientation mode '{other}' (expected fixed, drifting or per_session_random)"
            )),
        }
    }
}

impl std::fmt::Display for OrientationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OrientationMode::Fixed => "fixed",
            OrientationMode::Drifting => "drifting",
            OrientationMode::PerSessionRandom => "per_session_random",
        })
    }
}

/// Device orientation over a session, as (α, β, γ) degrees.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientationTrajectory {
    pub mode: OrientationMode,
    pub base: Vec3<f64>,
    /// Degrees per second applied to α; β and γ drift at 0.6 and 0.3 of it.
    pub drift_rate: f64,
    pub seed: u64,
}

impl OrientationTrajectory {
    pub fn fixed(base: Vec3<f64>) -> Self {
        OrientationTrajectory {
            mode: OrientationMode::Fixed,
            base,
            drift_rate: 0.0,
            seed: 0,
        }
    }

    pub fn drifting(base: Vec3<f64>, drift_rate: f64) -> Self {
        OrientationTrajectory {
            mode: OrientationMode::Drifting,
            base,
            drift_rate,
            seed: 0,
        }
    }

    /// A constant orientation drawn uniformly from α ∈ [0, 360),
    /// β ∈ [−180, 180), γ ∈ [−90, 90).
    pub fn per_session_random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        OrientationTrajectory {
            mode: OrientationMode::PerSessionRandom,
            base: [
                rng.random_range(0.0..360.0),
                rng.random_range(-180.0..180.0),
                rng.random_range(-90.0..90.0),
            ],
            drift_rate: 0.0,
            seed,
        }
    }

    pub fn angles_at(&self, t_s: f64) -> Vec3<f64> {
        match self.mode {
            OrientationMode::Fixed | OrientationMode::PerSessionRandom => self.base,
            OrientationMode::Drifting => {
                let d = self.drift_rate * t_s;
                [self.base[0] + d, self.base[1] + 0.6 * d, self.base[2] + 0.3 * d]
            }
        }
    }
}

/// Re-expresses Earth-frame samples in the device frame, adding gravity,
/// and emits accelerometer, gravity and orientation records on a common
/// time grid.
pub fn to_device_frame<T: Real>(
    earth: &[Vec3<T>],
    traj: &OrientationTrajectory,
    rate_hz: T,
    subject_id: &str,
    session_id: &str,
) -> Result<RawSession<T>> {
    let dt = T::lit(1000.0) / rate_hz;
    let g_earth = [T::zero(), T::zero(), T::lit(GRAVITY)];
    let mut records = Vec::with_capacity(3 * earth.len());
    for (i, e) in earth.iter().enumerate() {
        let t = T::from_usize_lossy(i) * dt;
        let o = traj.angles_at(t.as_f64() / 1000.0).map(T::lit);
        let rt = rotation_matrix(&o)?.transpose();
        let lin = rt.apply_row(e);
        let g = rt.apply_row(&g_earth);
        records.push(SensorRecord {
            t,
            kind: SensorKind::Accel,
            v: std::array::from_fn(|k| lin[k] + g[k]),
        });
        records.push(SensorRecord {
            t,
            kind: SensorKind::Gravity,
            v: g,
        });
        records.push(SensorRecord {
            t,
            kind: SensorKind::Orientation,
            v: o,
        });
    }
    RawSession::new(subject_id, session_id, records)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CohortConfig {
    pub n_subjects: usize,
    pub sessions_per_subject: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    pub seed: u64,
    pub orientation: OrientationMode,
    /// Drift rate for [`OrientationMode::Drifting`], degrees/s.
    pub drift_rate: f64,
    pub noise_sigma: f64,
    /// Minimum normalized parameter distance between any two subjects.
    pub distinctness_floor: f64,
    /// Relative per-session jitter of cycle duration and amplitudes.
    pub session_jitter: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig {
            n_subjects: 10,
            sessions_per_subject: 4,
            duration_s: 40.0,
            rate_hz: 27.0,
            seed: 7,
            orientation: OrientationMode::PerSessionRandom,
            drift_rate: 2.0,
            noise_sigma: 0.2,
            distinctness_floor: 0.35,
            session_jitter: 0.03,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticSession {
    pub subject_index: usize,
    pub params: SubjectParams,
    pub trajectory: OrientationTrajectory,
    pub earth: EarthGait,
    pub session: RawSession<f64>,
}

impl SyntheticSession {
    /// `<subject>_<session>`, the file stem used on disk.
    pub fn stem(&self) -> String {
        format!("{}_{}", self.session.subject_id, self.session.session_id)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cohort {
    pub subjects: Vec<SubjectParams>,
    pub sessions: Vec<SyntheticSession>,
}

fn draw_subject(rng: &mut ChaCha8Rng, noise_sigma: f64) -> SubjectParams {
    let depth = rng.random_range(2.0..5.0);
    let s: f64 = rng.random_range(0.3..0.8);
    let a2 = depth * (1.0 + s) / 2.0;
    SubjectParams {
        cycle_s: rng.random_range(0.9..1.4),
        depth,
        step_asymmetry: s,
        harmonics_z: vec![(rng.random_range(0.0..0.2) * a2, rng.random_range(-0.3..0.3))],
        harmonics_h: vec![
            (rng.random_range(0.5..2.0), rng.random_range(0.0..2.0 * PI)),
            (rng.random_range(0.3..1.5), rng.random_range(0.0..2.0 * PI)),
            (rng.random_range(0.0..0.5), rng.random_range(0.0..2.0 * PI)),
        ],
        heading: rng.random_range(0.0..2.0 * PI),
        noise_sigma,
        phase_s: 0.0,
        seed: rng.random(),
    }
}

/// Normalized distance between the gait-shape parameters of two subjects.
pub fn param_distance(a: &SubjectParams, b: &SubjectParams) -> f64 {
    let key = |p: &SubjectParams| {
        let mut k = vec![p.cycle_s / 0.5, p.depth / 3.0, p.step_asymmetry / 0.5];
        k.extend(p.harmonics_h.iter().map(|h| h.0 / 1.5));
        k
    };
    let (ka, kb) = (key(a), key(b));
    ka.iter().zip(&kb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

const MAX_DRAWS: usize = 10_000;

pub fn gen_cohort(cfg: &CohortConfig) -> Result<Cohort> {
    if cfg.n_subjects < 2 {
        return Err(GaitError::InsufficientSubjects(cfg.n_subjects));
    }
    if cfg.sessions_per_subject == 0 {
        return Err(GaitError::InvalidConfig("sessions per subject must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut subjects: Vec<SubjectParams> = Vec::with_capacity(cfg.n_subjects);
    while subjects.len() < cfg.n_subjects {
        let mut draws = 0;
        let candidate = loop {
            let c = draw_subject(&mut rng, cfg.noise_sigma);
            draws += 1;
            if subjects.iter().all(|s| param_distance(s, &c) >= cfg.distinctness_floor) {
                break c;
            }
            if draws == MAX_DRAWS {
                warn!("distinctness floor {} not met after {MAX_DRAWS} draws", cfg.distinctness_floor);
                break c;
            }
        };
        subjects.push(candidate);
    }

    let mut sessions = Vec::with_capacity(cfg.n_subjects * cfg.sessions_per_subject);
    for (si, subject) in subjects.iter().enumerate() {
        for k in 0..cfg.sessions_per_subject {
            let seed = derive_seed(cfg.seed, si as u64 + 1, k as u64 + 1);
            let mut srng = ChaCha8Rng::seed_from_u64(seed);
            let j = cfg.session_jitter;
            let mut jitter = |x: f64| x * (1.0 + srng.random_range(-j..=j));
            let mut params = subject.clone();
            params.cycle_s = jitter(params.cycle_s);
            params.depth = jitter(params.depth);
            for h in params.harmonics_h.iter_mut().chain(params.harmonics_z.iter_mut()) {
                h.0 = jitter(h.0);
            }
            params.phase_s = srng.random_range(0.0..params.cycle_s);
            params.seed = srng.random();
            let trajectory = match cfg.orientation {
                OrientationMode::Fixed => OrientationTrajectory::fixed([0.0; 3]),
                OrientationMode::Drifting => {
                    let base = [srng.random_range(0.0..360.0), srng.random_range(-60.0..60.0), 0.0];
                    OrientationTrajectory::drifting(base, cfg.drift_rate)
                }
                OrientationMode::PerSessionRandom => OrientationTrajectory::per_session_random(srng.random()),
            };
            let earth = gen_earth_gait(&params, cfg.duration_s, cfg.rate_hz)?;
            let subject_id = format!("S{:02}", si + 1);
            let session_id = format!("{:02}", k + 1);
            let session = to_device_frame(&earth.samples, &trajectory, cfg.rate_hz, &subject_id, &session_id)?;
            sessions.push(SyntheticSession {
                subject_index: si,
                params,
                trajectory,
                earth,
                session,
            });
        }
    }
    Ok(Cohort { subjects, sessions })
}

fn create(path: &Path) -> Result<std::io::BufWriter<std::fs::File>> {
    std::fs::File::create(path)
        .map(std::io::BufWriter::new)
        .map_err(|e| GaitError::io(path, e))
}

/// Writes `<stem>.csv`, `<stem>.truth.csv` per session and `manifest.csv`.
/// Returns the session log paths in cohort order.
pub fn write_cohort(cohort: &Cohort, cfg: &CohortConfig, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| GaitError::io(dir, e))?;
    let mut logs = Vec::with_capacity(cohort.sessions.len());
    let manifest_path = dir.join("manifest.csv");
    let mut manifest = csv::Writer::from_writer(create(&manifest_path)?);
    manifest.write_record([
        "file",
        "subject_id",
        "session_id",
        "master_seed",
        "noise_seed",
        "orientation_mode",
        "orientation_seed",
        "cycle_s",
    ])?;
    for s in &cohort.sessions {
        let stem = s.stem();
        let log_path = dir.join(format!("{stem}.csv"));
        write_log(&s.session, create(&log_path)?)?;

        let truth_path = dir.join(format!("{stem}.truth.csv"));
        let mut truth = csv::Writer::from_writer(create(&truth_path)?);
        truth.write_record(["session_id", "cycle_start_index"])?;
        for &i in &s.earth.truth {
            truth.write_record([stem.clone(), i.to_string()])?;
        }
        truth.flush().map_err(|e| GaitError::io(&truth_path, e))?;

        manifest.write_record([
            format!("{stem}.csv"),
            s.session.subject_id.clone(),
            s.session.session_id.clone(),
            cfg.seed.to_string(),
            s.params.seed.to_string(),
            s.trajectory.mode.to_string(),
            s.trajectory.seed.to_string(),
            s.params.cycle_s.to_string(),
        ])?;
        logs.push(log_path);
    }
    let mut inner = manifest
        .into_inner()
        .map_err(|e| GaitError::io(&manifest_path, e.into_error()))?;
    inner.flush().map_err(|e| GaitError::io(&manifest_path, e))?;
    Ok(logs)
}
