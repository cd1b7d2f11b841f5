//! Raw sensor log ingestion: parsing, uniform resampling, triplet alignment
//! and wavelet denoising.
//!
//! Logs are CSV files with header `t_ms,sensor,x,y,z`, one walking session per
//! file. `sensor` is one of `acc`, `grav` or `orient`; accelerometer and
//! gravity rows are in m/s², orientation rows carry (azimuth, pitch, roll)
//! in degrees.

mod resample;
mod wavelet;

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use crate::error::{GaitError, Result};
use crate::num::Real;

pub use resample::{align, interpolate_at, resample, AlignedFrame, DEFAULT_RATE_HZ};
pub use wavelet::{wavedec, waverec, wavelet_denoise, WaveletDecomposition, DB6_LO};

pub type Vec3<T> = [T; 3];

pub const LOG_HEADER: [&str; 5] = ["t_ms", "sensor", "x", "y", "z"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SensorKind {
    Accel,
    Gravity,
    Orientation,
}

impl SensorKind {
    pub const ALL: [SensorKind; 3] = [SensorKind::Accel, SensorKind::Gravity, SensorKind::Orientation];

    pub fn token(self) -> &'static str {
        match self {
            SensorKind::Accel => "acc",
            SensorKind::Gravity => "grav",
            SensorKind::Orientation => "orient",
        }
    }

    fn stream_name(self) -> &'static str {
        match self {
            SensorKind::Accel => "accel",
            SensorKind::Gravity => "gravity",
            SensorKind::Orientation => "orientation",
        }
    }
}

impl FromStr for SensorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "acc" => Ok(SensorKind::Accel),
            "grav" => Ok(SensorKind::Gravity),
            "orient" => Ok(SensorKind::Orientation),
            other => Err(format!("unknown sensor '{other}' (expected acc, grav or orient)")),
        }
    }
}

impl fmt::Display for SensorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// One time-stamped tri-axial sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorRecord<T> {
    /// Milliseconds since session start.
    pub t: T,
    pub kind: SensorKind,
    pub v: Vec3<T>,
}

/// A parsed walking session. Records are sorted by time (stable, so equal
/// timestamps keep their input order).
#[derive(Clone, Debug, PartialEq)]
pub struct RawSession<T> {
    pub subject_id: String,
    pub session_id: String,
    pub records: Vec<SensorRecord<T>>,
}

impl<T: Real> RawSession<T> {
    /// Builds a session, sorting records and checking that every stream has
    /// at least two samples.
    pub fn new(
        subject_id: impl Into<String>,
        session_id: impl Into<String>,
        mut records: Vec<SensorRecord<T>>,
    ) -> Result<Self> {
        if records.is_empty() {
            return Err(GaitError::Empty);
        }
        records.sort_by(|a, b| a.t.partial_cmp(&b.t).expect("finite timestamps"));

        let counts = SensorKind::ALL.map(|k| records.iter().filter(|r| r.kind == k).count());
        let missing: Vec<&str> = SensorKind::ALL
            .iter()
            .zip(counts)
            .filter(|(_, c)| *c == 0)
            .map(|(k, _)| k.stream_name())
            .collect();
        if !missing.is_empty() {
            return Err(GaitError::MissingStreams(missing.join("/")));
        }
        for (kind, count) in SensorKind::ALL.iter().zip(counts) {
            if count < 2 {
                return Err(GaitError::TooShort {
                    what: kind.stream_name(),
                    need: 2,
                    got: count,
                });
            }
        }
        Ok(RawSession {
            subject_id: subject_id.into(),
            session_id: session_id.into(),
            records,
        })
    }

    /// The `(t, v)` series of one sensor, in time order.
    pub fn stream(&self, kind: SensorKind) -> Vec<(T, Vec3<T>)> {
        self.records
            .iter()
            .filter(|r| r.kind == kind)
            .map(|r| (r.t, r.v))
            .collect()
    }
}

fn parse_field<T: Real>(field: &str, name: &str, line: u64) -> Result<T> {
    let value: f64 = field.trim().parse().map_err(|_| GaitError::Parse {
        line,
        msg: format!("invalid {name} '{field}'"),
    })?;
    if !value.is_finite() {
        return Err(GaitError::Parse {
            line,
            msg: format!("non-finite {name}"),
        });
    }
    Ok(T::lit(value))
}

/// Parses a session log.
pub fn parse_log<T: Real, R: Read>(
    input: R,
    subject_id: impl Into<String>,
    session_id: impl Into<String>,
) -> Result<RawSession<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(input);

    let mut rows = reader.records();
    let header = match rows.next() {
        None => return Err(GaitError::Empty),
        Some(h) => h?,
    };
    if header.iter().ne(LOG_HEADER.iter().copied()) {
        return Err(GaitError::Parse {
            line: 1,
            msg: format!("expected header '{}'", LOG_HEADER.join(",")),
        });
    }

    let mut records = Vec::new();
    for row in rows {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 5 {
            return Err(GaitError::Parse {
                line,
                msg: format!("expected 5 fields, got {}", row.len()),
            });
        }
        let t: T = parse_field(&row[0], "t_ms", line)?;
        if t < T::zero() {
            return Err(GaitError::Parse {
                line,
                msg: "negative timestamp".into(),
            });
        }
        let kind = row[1]
            .parse::<SensorKind>()
            .map_err(|msg| GaitError::Parse { line, msg })?;
        let v = [
            parse_field(&row[2], "x", line)?,
            parse_field(&row[3], "y", line)?,
            parse_field(&row[4], "z", line)?,
        ];
        records.push(SensorRecord { t, kind, v });
    }
    RawSession::new(subject_id, session_id, records)
}

/// Writes a session in the log format. Values use the shortest round-trip
/// representation, so `parse_log` recovers them bit for bit.
pub fn write_log<T: Real, W: Write>(session: &RawSession<T>, out: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(LOG_HEADER)?;
    for r in &session.records {
        writer.write_record([
            r.t.to_string(),
            r.kind.token().to_string(),
            r.v[0].to_string(),
            r.v[1].to_string(),
            r.v[2].to_string(),
        ])?;
    }
    writer.flush().map_err(|e| GaitError::io("<log writer>", e))?;
    Ok(())
}
