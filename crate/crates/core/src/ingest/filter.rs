use serde::{Deserialize, Serialize};

use super::ProjectedTrajectory;
use crate::error::{Error, Result};

/// Minimum planar displacement for a point to count as a new location, meters.
pub const DISTINCT_POINT_M: f64 = 1.0;

/// Quality thresholds a trajectory must meet to be kept.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterPolicy {
    pub min_points: usize,
    /// Meters between consecutive points.
    pub max_gap_space: f64,
    /// Seconds between consecutive points.
    pub max_gap_time: f64,
    /// Meters.
    pub max_accuracy: f64,
    /// Kilometers per hour.
    pub max_speed: f64,
}

impl Default for FilterPolicy {
    fn default() -> Self {
        Self {
            min_points: 5,
            max_gap_space: 3000.0,
            max_gap_time: 1800.0,
            max_accuracy: 1200.0,
            max_speed: 90.0,
        }
    }
}

impl FilterPolicy {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_points > 0
            && [self.max_gap_space, self.max_gap_time, self.max_accuracy, self.max_speed]
                .iter()
                .all(|v| *v > 0.0 && !v.is_nan());
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("filter thresholds must be positive: {self:?}")))
        }
    }
}

/// The first policy predicate a trajectory violated, in checking order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    MinPoints,
    MaxGapSpace,
    MaxGapTime,
    MaxAccuracy,
    MaxSpeed,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::MinPoints => "min_points",
            DropReason::MaxGapSpace => "max_gap_space",
            DropReason::MaxGapTime => "max_gap_time",
            DropReason::MaxAccuracy => "max_accuracy",
            DropReason::MaxSpeed => "max_speed",
        }
    }
}

impl std::fmt::Display for DropReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dropped {
    pub trajectory: ProjectedTrajectory,
    pub reason: DropReason,
}

/// Number of points farther than [`DISTINCT_POINT_M`] from their predecessor;
/// the first point always counts.
pub fn distinct_points(traj: &ProjectedTrajectory) -> usize {
    if traj.points.is_empty() {
        return 0;
    }
    1 + traj
        .points
        .windows(2)
        .filter(|w| (w[1].x - w[0].x).hypot(w[1].y - w[0].y) > DISTINCT_POINT_M)
        .count()
}

/// First violated predicate, or `None` if `traj` passes the policy.
pub fn check(traj: &ProjectedTrajectory, policy: &FilterPolicy) -> Option<DropReason> {
    if distinct_points(traj) < policy.min_points {
        return Some(DropReason::MinPoints);
    }
    let segments = || traj.points.windows(2).map(|w| (&w[0], &w[1]));
    if segments().any(|(a, b)| (b.x - a.x).hypot(b.y - a.y) > policy.max_gap_space) {
        return Some(DropReason::MaxGapSpace);
    }
    if segments().any(|(a, b)| (b.timestamp - a.timestamp) as f64 > policy.max_gap_time) {
        return Some(DropReason::MaxGapTime);
    }
    if traj
        .points
        .iter()
        .any(|p| p.accuracy.is_some_and(|a| a > policy.max_accuracy))
    {
        return Some(DropReason::MaxAccuracy);
    }
    let too_fast = segments().any(|(a, b)| {
        let dt = (b.timestamp - a.timestamp) as f64;
        let kmh = (b.x - a.x).hypot(b.y - a.y) / dt * 3.6;
        dt <= 0.0 || kmh > policy.max_speed
    });
    if too_fast {
        return Some(DropReason::MaxSpeed);
    }
    None
}

/// Splits `trajs` into kept and dropped, preserving input order in both.
pub fn filter_trajectories(
    trajs: Vec<ProjectedTrajectory>,
    policy: &FilterPolicy,
) -> (Vec<ProjectedTrajectory>, Vec<Dropped>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for t in trajs {
        match check(&t, policy) {
            None => kept.push(t),
            Some(reason) => dropped.push(Dropped { trajectory: t, reason }),
        }
    }
    (kept, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::ProjectedPoint;

    fn walk(n: usize, step_m: f64, step_s: i64) -> ProjectedTrajectory {
        ProjectedTrajectory {
            trajectory_id: "t".into(),
            user_id: "u".into(),
            points: (0..n)
                .map(|i| ProjectedPoint {
                    x: i as f64 * step_m,
                    y: 0.0,
                    timestamp: i as i64 * step_s,
                    accuracy: Some(10.0),
                })
                .collect(),
        }
    }

    #[test]
    fn four_distinct_points_fail_min_points() {
        let mut t = walk(4, 100.0, 60);
        // A repeated fix does not add a distinct location.
        let mut dup = t.points[3].clone();
        dup.timestamp += 30;
        dup.x += 0.5;
        t.points.push(dup);
        assert_eq!(distinct_points(&t), 4);
        assert_eq!(check(&t, &FilterPolicy::default()), Some(DropReason::MinPoints));
    }

    #[test]
    fn thirty_one_minute_gap() {
        let mut t = walk(6, 100.0, 60);
        for p in &mut t.points[3..] {
            p.timestamp += 31 * 60;
        }
        assert_eq!(check(&t, &FilterPolicy::default()), Some(DropReason::MaxGapTime));
    }

    #[test]
    fn predicate_order_and_pass_through() {
        let policy = FilterPolicy::default();
        let ok = walk(6, 100.0, 60);
        let (kept, dropped) = filter_trajectories(vec![ok.clone()], &policy);
        assert_eq!(kept, vec![ok]);
        assert!(dropped.is_empty());

        // 4 km in 10 s breaks space gap, time is fine, speed too; space is first.
        assert_eq!(check(&walk(6, 4000.0, 10), &policy), Some(DropReason::MaxGapSpace));
        // 1 km per 10 s = 360 km/h.
        assert_eq!(check(&walk(6, 1000.0, 10), &policy), Some(DropReason::MaxSpeed));
        let mut bad_acc = walk(6, 100.0, 60);
        bad_acc.points[2].accuracy = Some(1500.0);
        assert_eq!(check(&bad_acc, &policy), Some(DropReason::MaxAccuracy));
    }
}
