use serde::{Deserialize, Serialize};

use super::{NormalizedTrajectory, ProjectedTrajectory};
use crate::error::{Error, Result};

/// Direction of the affine map onto `[0, 1]` for the spatial axes.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    /// `(max - v) / (max - min)`: the axis maximum maps to 0.
    #[default]
    #[serde(rename = "max0")]
    MaxToZero,
    /// `(v - min) / (max - min)`.
    #[serde(rename = "min0")]
    MinToZero,
}

impl std::str::FromStr for Orientation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max0" => Ok(Self::MaxToZero),
            "min0" => Ok(Self::MinToZero),
            other => Err(Error::invalid(format!(
                "unknown orientation `{other}` (expected max0 or min0)"
            ))),
        }
    }
}

/// Global per-axis ranges of a corpus in meters (spatial) and seconds
/// (elapsed time).
///
/// Elapsed time is always mapped min→0 whatever the orientation: reversing it
/// would make normalized time decrease along every trajectory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub min_c1: f64,
    pub max_c1: f64,
    pub min_c2: f64,
    pub max_c2: f64,
    pub min_t: f64,
    pub max_t: f64,
    #[serde(default)]
    pub orientation: Orientation,
}

const AXES: [&str; 3] = ["c1", "c2", "t"];

impl NormalizationParams {
    fn range(&self, axis: usize) -> (f64, f64) {
        match axis {
            0 => (self.min_c1, self.max_c1),
            1 => (self.min_c2, self.max_c2),
            _ => (self.min_t, self.max_t),
        }
    }

    fn reversed(&self, axis: usize) -> bool {
        axis < 2 && self.orientation == Orientation::MaxToZero
    }

    pub fn validate(&self) -> Result<()> {
        for (axis, name) in AXES.iter().enumerate() {
            let (lo, hi) = self.range(axis);
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::invalid(format!("axis `{name}` has a non-finite range")));
            }
            if hi <= lo {
                return Err(Error::DegenerateAxis { axis: name, value: lo });
            }
        }
        Ok(())
    }

    /// Maps a planar/elapsed-time value on `axis` (0, 1, 2) into `[0, 1]`.
    pub fn normalize_value(&self, axis: usize, v: f64) -> f64 {
        let (lo, hi) = self.range(axis);
        if self.reversed(axis) {
            (hi - v) / (hi - lo)
        } else {
            (v - lo) / (hi - lo)
        }
    }

    pub fn denormalize_value(&self, axis: usize, v: f64) -> f64 {
        let (lo, hi) = self.range(axis);
        if self.reversed(axis) {
            hi - v * (hi - lo)
        } else {
            lo + v * (hi - lo)
        }
    }

    pub fn normalize_point(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.normalize_value(a, p[a]))
    }

    /// Inverse of [`normalize_point`](Self::normalize_point): meters and
    /// elapsed seconds.
    pub fn denormalize_point(&self, p: [f64; 3]) -> [f64; 3] {
        [0, 1, 2].map(|a| self.denormalize_value(a, p[a]))
    }

    /// Planar extent `(max_c1 - min_c1, max_c2 - min_c2)` in meters.
    pub fn spatial_extent(&self) -> (f64, f64) {
        (self.max_c1 - self.min_c1, self.max_c2 - self.min_c2)
    }
}

/// Normalizes a corpus with ranges taken over all its points.
///
/// Elapsed time is `timestamp - first timestamp` per trajectory.
pub fn normalize(
    trajs: &[ProjectedTrajectory],
    orientation: Orientation,
) -> Result<(Vec<NormalizedTrajectory>, NormalizationParams)> {
    if trajs.is_empty() || trajs.iter().all(|t| t.points.is_empty()) {
        return Err(Error::invalid("cannot normalize an empty corpus"));
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for t in trajs {
        let Some(first) = t.points.first() else { continue };
        for p in &t.points {
            let v = [p.x, p.y, (p.timestamp - first.timestamp) as f64];
            for a in 0..3 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
    }
    let params = NormalizationParams {
        min_c1: lo[0],
        max_c1: hi[0],
        min_c2: lo[1],
        max_c2: hi[1],
        min_t: lo[2],
        max_t: hi[2],
        orientation,
    };
    params.validate()?;
    let out = trajs
        .iter()
        .filter(|t| !t.points.is_empty())
        .map(|t| {
            let t0 = t.points[0].timestamp;
            NormalizedTrajectory {
                trajectory_id: t.trajectory_id.clone(),
                user_id: t.user_id.clone(),
                start_time: t0,
                points: t
                    .points
                    .iter()
                    .map(|p| {
                        let n = params.normalize_point([p.x, p.y, (p.timestamp - t0) as f64]);
                        n.map(|v| v.clamp(0.0, 1.0))
                    })
                    .collect(),
            }
        })
        .collect();
    Ok((out, params))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ProjectedPoint;

    fn traj(id: &str, pts: &[(f64, f64, i64)]) -> ProjectedTrajectory {
        ProjectedTrajectory {
            trajectory_id: id.into(),
            user_id: "u".into(),
            points: pts
                .iter()
                .map(|&(x, y, timestamp)| ProjectedPoint {
                    x,
                    y,
                    timestamp,
                    accuracy: None,
                })
                .collect(),
        }
    }

    #[test]
    fn midpoint_and_maximum() {
        let corpus = [
            traj("a", &[(500_000.0, 0.0, 100), (505_000.0, 5.0, 160)]),
            traj("b", &[(510_000.0, 10.0, 1000), (502_000.0, 3.0, 1030)]),
        ];
        let (out, params) = normalize(&corpus, Orientation::MinToZero).unwrap();
        assert_eq!(out[0].points[1][0], 0.5);
        assert_eq!(params.max_t, 60.0);
        assert_eq!(out[0].points[0][2], 0.0);

        let (out, _) = normalize(&corpus, Orientation::MaxToZero).unwrap();
        assert_eq!(out[0].points[1][0], 0.5);
        assert_eq!(out[1].points[0][0], 0.0);
        assert_eq!(out[0].points[0][0], 1.0);
        // Time is never reversed.
        assert_eq!(out[1].points[1][2], 0.5);
        assert_eq!(out[1].start_time, 1000);
    }

    #[test]
    fn degenerate_axis_names_axis() {
        let corpus = [traj("a", &[(1.0, 2.0, 0), (1.0, 3.0, 10)])];
        let err = normalize(&corpus, Orientation::MaxToZero).unwrap_err();
        assert!(matches!(err, Error::DegenerateAxis { axis: "c1", .. }));
    }
}
