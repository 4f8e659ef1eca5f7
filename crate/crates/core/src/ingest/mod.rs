//! Raw GPS signals to normalized trajectories: CSV parsing, planar
//! projection, quality filtering and `[0, 1]` normalization.

mod filter;
mod normalize;
mod projection;

use std::collections::HashMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use filter::{check, distinct_points, filter_trajectories, DropReason, Dropped, FilterPolicy, DISTINCT_POINT_M};
pub use normalize::{normalize, NormalizationParams, Orientation};
pub use projection::{project_planar, utm_zone, Projection, ProjectionMode, EARTH_RADIUS_M};

/// Version written into the ingest sidecar file.
pub const SIDECAR_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPoint {
    pub lat: f64,
    pub lon: f64,
    /// Seconds since the Unix epoch.
    pub timestamp: i64,
    pub accuracy: Option<f64>,
    pub user_id: String,
}

/// One trip of one user, points in strictly increasing timestamp order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawTrajectory {
    pub trajectory_id: String,
    pub user_id: String,
    pub points: Vec<RawPoint>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    /// Easting, meters.
    pub x: f64,
    /// Northing, meters.
    pub y: f64,
    pub timestamp: i64,
    pub accuracy: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectedTrajectory {
    pub trajectory_id: String,
    pub user_id: String,
    pub points: Vec<ProjectedPoint>,
}

/// Trajectory with `(c1', c2', t')` points in `[0, 1]^3`; `t'` is normalized
/// elapsed time. `start_time` is kept as metadata and used nowhere else.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizedTrajectory {
    pub trajectory_id: String,
    pub user_id: String,
    pub start_time: i64,
    pub points: Vec<[f64; 3]>,
}

/// A CSV data row that could not be used.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectedRow {
    pub line: u64,
    pub reason: String,
}

/// A whole trajectory excluded before or during filtering.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedTrajectory {
    pub trajectory_id: String,
    pub user_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParsedSignals {
    pub trajectories: Vec<RawTrajectory>,
    pub rejects: Vec<RejectedRow>,
    pub excluded: Vec<ExcludedTrajectory>,
}

const REQUIRED_COLUMNS: [&str; 5] = ["user_id", "trajectory_id", "timestamp", "lat", "lon"];

/// Parses a signals CSV into trajectories.
///
/// Rows are grouped by `(user_id, trajectory_id)` in order of first
/// appearance and sorted by timestamp. Bad rows go to `rejects`; trajectories
/// with repeated timestamps, fewer than two points, or an id already used by
/// another user go to `excluded`.
pub fn parse_signals<R: Read>(input: R) -> Result<ParsedSignals> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Parse {
        line: 1,
        message: e.to_string(),
    })?;
    let col = |name: &str| headers.iter().position(|h| h == name);
    let mut idx = [0usize; 5];
    for (slot, name) in idx.iter_mut().zip(REQUIRED_COLUMNS) {
        *slot = col(name).ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("missing required column `{name}`"),
        })?;
    }
    let accuracy_col = col("accuracy");
    let [c_user, c_traj, c_ts, c_lat, c_lon] = idx;

    let mut out = ParsedSignals::default();
    let mut groups: Vec<RawTrajectory> = Vec::new();
    let mut index: HashMap<(String, String), usize> = HashMap::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        match reader.read_record(&mut record) {
            Ok(false) => break,
            Ok(true) => {}
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line());
                out.rejects.push(RejectedRow {
                    line,
                    reason: e.to_string(),
                });
                continue;
            }
        }
        let line = record.position().map_or(line, |p| p.line());
        match parse_row(&record, [c_user, c_traj, c_ts, c_lat, c_lon], accuracy_col) {
            Ok((traj_id, point)) => {
                let key = (point.user_id.clone(), traj_id);
                let slot = *index.entry(key.clone()).or_insert_with(|| {
                    groups.push(RawTrajectory {
                        trajectory_id: key.1.clone(),
                        user_id: key.0.clone(),
                        points: Vec::new(),
                    });
                    groups.len() - 1
                });
                groups[slot].points.push(point);
            }
            Err(reason) => out.rejects.push(RejectedRow { line, reason }),
        }
    }

    let mut seen_ids: HashMap<String, String> = HashMap::new();
    for mut traj in groups {
        let exclude = |traj: &RawTrajectory, reason: String| ExcludedTrajectory {
            trajectory_id: traj.trajectory_id.clone(),
            user_id: traj.user_id.clone(),
            reason,
        };
        if let Some(owner) = seen_ids.get(&traj.trajectory_id) {
            let reason = format!("trajectory id already used by user `{owner}`");
            out.excluded.push(exclude(&traj, reason));
            continue;
        }
        seen_ids.insert(traj.trajectory_id.clone(), traj.user_id.clone());
        traj.points.sort_by_key(|p| p.timestamp);
        if let Some(w) = traj.points.windows(2).find(|w| w[0].timestamp == w[1].timestamp) {
            let reason = format!("duplicate timestamp {}", w[0].timestamp);
            out.excluded.push(exclude(&traj, reason));
            continue;
        }
        if traj.points.len() < 2 {
            out.excluded.push(exclude(&traj, "fewer than two points".into()));
            continue;
        }
        out.trajectories.push(traj);
    }
    Ok(out)
}

fn parse_row(
    record: &csv::StringRecord,
    cols: [usize; 5],
    accuracy_col: Option<usize>,
) -> std::result::Result<(String, RawPoint), String> {
    let field = |i: usize, name: &str| {
        record
            .get(i)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| format!("missing `{name}`"))
    };
    let number = |i: usize, name: &str| -> std::result::Result<f64, String> {
        let raw = field(i, name)?;
        let v: f64 = raw.parse().map_err(|_| format!("`{name}` is not a number: {raw}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("`{name}` is not finite"))
        }
    };
    let [c_user, c_traj, c_ts, c_lat, c_lon] = cols;
    let user_id = field(c_user, "user_id")?.to_string();
    let traj_id = field(c_traj, "trajectory_id")?.to_string();
    let raw_ts = field(c_ts, "timestamp")?;
    let timestamp: i64 = raw_ts
        .parse()
        .map_err(|_| format!("`timestamp` is not an integer: {raw_ts}"))?;
    let lat = number(c_lat, "lat")?;
    let lon = number(c_lon, "lon")?;
    if !(-90.0..=90.0).contains(&lat) {
        return Err(format!("latitude {lat} outside [-90, 90]"));
    }
    if !(-180.0..=180.0).contains(&lon) {
        return Err(format!("longitude {lon} outside [-180, 180]"));
    }
    let accuracy = match accuracy_col.and_then(|i| record.get(i)).filter(|s| !s.is_empty()) {
        None => None,
        Some(_) => {
            let a = number(accuracy_col.unwrap(), "accuracy")?;
            if a < 0.0 {
                return Err(format!("negative accuracy {a}"));
            }
            Some(a)
        }
    };
    Ok((
        traj_id,
        RawPoint {
            lat,
            lon,
            timestamp,
            accuracy,
            user_id,
        },
    ))
}

/// Writes one JSON object per line.
pub fn write_ndjson<W: Write>(mut out: W, trajs: &[NormalizedTrajectory]) -> Result<()> {
    for t in trajs {
        serde_json::to_writer(&mut out, t)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads trajectories written by [`write_ndjson`], skipping blank lines.
pub fn read_ndjson<R: BufRead>(input: R) -> Result<Vec<NormalizedTrajectory>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let t = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: i as u64 + 1,
            message: e.to_string(),
        })?;
        out.push(t);
    }
    Ok(out)
}

/// Everything needed to map normalized coordinates back to meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IngestSidecar {
    pub format_version: u32,
    pub normalization: NormalizationParams,
    pub projection: Projection,
    pub policy: FilterPolicy,
}

/// Summary of what parsing and filtering removed.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RejectsReport {
    pub rows: Vec<RejectedRow>,
    pub trajectories: Vec<ExcludedTrajectory>,
}

/// Result of the full ingest chain.
#[derive(Clone, Debug)]
pub struct IngestOutput {
    pub trajectories: Vec<NormalizedTrajectory>,
    pub sidecar: IngestSidecar,
    pub rejects: RejectsReport,
}

/// Parse, project, filter and normalize a signals CSV.
///
/// The projection is fitted on the parsed corpus; normalization ranges come
/// from the trajectories that survive filtering.
pub fn ingest<R: Read>(
    input: R,
    mode: ProjectionMode,
    policy: &FilterPolicy,
    orientation: Orientation,
) -> Result<IngestOutput> {
    policy.validate()?;
    let parsed = parse_signals(input)?;
    let projection = Projection::fit(mode, &parsed.trajectories)?;
    let projected = parsed
        .trajectories
        .iter()
        .map(|t| project_planar(t, &projection))
        .collect::<Result<Vec<_>>>()?;
    let (kept, dropped) = filter_trajectories(projected, policy);
    let mut rejects = RejectsReport {
        rows: parsed.rejects,
        trajectories: parsed.excluded,
    };
    rejects
        .trajectories
        .extend(dropped.into_iter().map(|d| ExcludedTrajectory {
            trajectory_id: d.trajectory.trajectory_id,
            user_id: d.trajectory.user_id,
            reason: d.reason.to_string(),
        }));
    if kept.is_empty() {
        return Err(Error::invalid("no trajectory survived filtering"));
    }
    let (trajectories, normalization) = normalize(&kept, orientation)?;
    Ok(IngestOutput {
        trajectories,
        sidecar: IngestSidecar {
            format_version: SIDECAR_FORMAT_VERSION,
            normalization,
            projection,
            policy: policy.clone(),
        },
        rejects,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_and_sorts_rows() {
        let csv = "user_id,trajectory_id,timestamp,lat,lon\n\
                   u,t,30,45.002,9.0\n\
                   u,t,10,45.000,9.0\n\
                   u,t,20,45.001,9.0\n";
        let parsed = parse_signals(csv.as_bytes()).unwrap();
        assert_eq!(parsed.trajectories.len(), 1);
        let ts: Vec<i64> = parsed.trajectories[0].points.iter().map(|p| p.timestamp).collect();
        assert_eq!(ts, [10, 20, 30]);
        assert!(parsed.rejects.is_empty());
    }

    #[test]
    fn out_of_range_row_is_rejected_with_line() {
        let csv = "user_id,trajectory_id,timestamp,lat,lon,accuracy\n\
                   u,t,1,45.0,9.0,5\n\
                   u,t,2,95.0,9.0,5\n\
                   u,t,3,45.1,9.0,\n";
        let parsed = parse_signals(csv.as_bytes()).unwrap();
        assert_eq!(parsed.rejects.len(), 1);
        assert_eq!(parsed.rejects[0].line, 3);
        assert_eq!(parsed.trajectories[0].points.len(), 2);
        assert_eq!(parsed.trajectories[0].points[1].accuracy, None);
    }

    #[test]
    fn missing_column_is_fatal() {
        let csv = "user_id,trajectory_id,timestamp,lat\nu,t,1,45\n";
        let err = parse_signals(csv.as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn duplicate_timestamps_exclude_trajectory() {
        let csv = "user_id,trajectory_id,timestamp,lat,lon\n\
                   u,a,1,45.0,9.0\nu,a,1,45.1,9.0\nu,a,2,45.2,9.0\n\
                   u,b,1,45.0,9.0\nu,b,2,45.1,9.0\n";
        let parsed = parse_signals(csv.as_bytes()).unwrap();
        assert_eq!(parsed.trajectories.len(), 1);
        assert_eq!(parsed.trajectories[0].trajectory_id, "b");
        assert_eq!(parsed.excluded[0].trajectory_id, "a");
    }

    #[test]
    fn ndjson_roundtrip() {
        let t = NormalizedTrajectory {
            trajectory_id: "x".into(),
            user_id: "u".into(),
            start_time: 17,
            points: vec![[0.1, 0.2, 0.0], [0.3, 0.4, 1.0]],
        };
        let mut buf = Vec::new();
        write_ndjson(&mut buf, &[t.clone(), t.clone()]).unwrap();
        assert_eq!(read_ndjson(&buf[..]).unwrap(), vec![t.clone(), t]);
    }
}
