//! CSV export of simulation logs and column extraction for offline analysis.
//!
//! Floats are written with `f64`'s `Display`, which round-trips exactly.
//! Absent optional values are empty fields.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::experiments::SweepRow;
use crate::sim::{LogRow, SimLog};
use crate::stats::SummaryStats;
use crate::vehicle::VehicleId;

pub const LOG_HEADER: [&str; 11] =
    ["t", "id", "x", "y", "yaw", "v", "a_command", "a_applied", "gap_to_predecessor", "spacing_error", "warning_flag"];
pub const EVENT_HEADER: [&str; 5] = ["time", "follower_id", "leader_id", "d_a", "d_sf"];
pub const TRACE_HEADER: [&str; 5] = ["deliver_at", "src", "dst", "speed", "accel"];
pub const SWEEP_HEADER: [&str; 14] = [
    "delay",
    "n",
    "abs_mean",
    "abs_median",
    "abs_std",
    "abs_variance",
    "abs_min",
    "abs_max",
    "signed_mean",
    "signed_median",
    "signed_std",
    "signed_variance",
    "signed_min",
    "signed_max",
];

#[derive(Debug, Error)]
pub enum LogIoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: no column named '{column}'")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: line {line}: cannot parse '{value}' in column '{column}'")]
    BadValue { path: PathBuf, line: u64, column: String, value: String },
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn row_fields(r: &LogRow) -> [String; 11] {
    [
        r.t.to_string(),
        r.id.to_string(),
        r.x.to_string(),
        r.y.to_string(),
        r.yaw.to_string(),
        r.v.to_string(),
        r.a_command.to_string(),
        r.a_applied.to_string(),
        opt(r.gap_to_predecessor),
        opt(r.spacing_error),
        u8::from(r.warning).to_string(),
    ]
}

fn write_table<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), LogIoError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let csv_err = |source| LogIoError::Csv { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(|source| LogIoError::Io { path: path.to_path_buf(), source })?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(header).map_err(csv_err)?;
    for r in rows {
        w.write_record(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| LogIoError::Io { path: path.to_path_buf(), source })
}

/// Path of the warning-event file written next to `path`.
pub fn events_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".events.csv");
    PathBuf::from(s)
}

/// Writes the per-tick log to `path` and the warning events to
/// [`events_path`]`(path)`.
pub fn export_csv(log: &SimLog, path: &Path) -> Result<(), LogIoError> {
    write_table(path, &LOG_HEADER, log.rows.iter().map(row_fields))?;
    let events = log.warnings.iter().map(|w| {
        [w.time.to_string(), w.follower_id.to_string(), w.leader_id.to_string(), w.d_a.to_string(), w.d_sf.to_string()]
    });
    write_table(&events_path(path), &EVENT_HEADER, events)
}

/// Writes one line per delivered message.
pub fn export_trace(log: &SimLog, path: &Path) -> Result<(), LogIoError> {
    let rows = log.deliveries.iter().map(|d| {
        [d.deliver_at.to_string(), d.src.to_string(), d.dst.to_string(), d.speed.to_string(), d.accel.to_string()]
    });
    write_table(path, &TRACE_HEADER, rows)
}

fn stat_fields(s: &SummaryStats) -> [String; 6] {
    [s.mean, s.median, s.std, s.variance, s.min, s.max].map(|x| x.to_string())
}

/// One line per delay: summary of `|v_L − v_F|`, then of the signed series.
pub fn export_sweep(rows: &[SweepRow], path: &Path) -> Result<(), LogIoError> {
    let lines = rows.iter().map(|r| {
        let mut v = vec![r.delay.to_string(), r.abs_diff.n.to_string()];
        v.extend(stat_fields(&r.abs_diff));
        v.extend(stat_fields(&r.signed_diff));
        v
    });
    write_table(path, &SWEEP_HEADER, lines)
}

/// Writes a log to an in-memory CSV string, identical to [`export_csv`]'s
/// main file.
pub fn log_to_csv_string(log: &SimLog) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(LOG_HEADER).expect("in-memory write");
    for r in &log.rows {
        w.write_record(row_fields(r)).expect("in-memory write");
    }
    let mut buf = w.into_inner().expect("in-memory flush");
    buf.flush().expect("in-memory flush");
    String::from_utf8(buf).expect("csv output is utf-8")
}

/// Numeric values of `column`, optionally restricted to rows whose `id`
/// equals `vehicle`. Empty fields are skipped.
pub fn read_column(path: &Path, column: &str, vehicle: Option<VehicleId>) -> Result<Vec<f64>, LogIoError> {
    let csv_err = |source| LogIoError::Csv { path: path.to_path_buf(), source };
    let file = File::open(path).map_err(|source| LogIoError::Io { path: path.to_path_buf(), source })?;
    let mut r = csv::Reader::from_reader(file);
    let headers = r.headers().map_err(csv_err)?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| LogIoError::MissingColumn { path: path.to_path_buf(), column: name.to_string() })
    };
    let col = find(column)?;
    let id_col = vehicle.map(|_| find("id")).transpose()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if let (Some(ic), Some(want)) = (id_col, vehicle) {
            if rec.get(ic).and_then(|s| s.trim().parse::<u32>().ok()) != Some(want.0) {
                continue;
            }
        }
        let raw = rec.get(col).unwrap_or("").trim();
        if raw.is_empty() {
            continue;
        }
        let value = raw.parse::<f64>().map_err(|_| LogIoError::BadValue {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            value: raw.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}
