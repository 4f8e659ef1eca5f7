use serde::{Deserialize, Serialize};

use super::{ProjectedPoint, ProjectedTrajectory, RawTrajectory};
use crate::error::{Error, Result};

/// Mean Earth radius used by the local tangent-plane projection, meters.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

const WGS84_A: f64 = 6_378_137.0;
const WGS84_F: f64 = 1.0 / 298.257_223_563;
const UTM_K0: f64 = 0.9996;
const UTM_FALSE_EASTING: f64 = 500_000.0;
const UTM_FALSE_NORTHING_SOUTH: f64 = 10_000_000.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProjectionMode {
    /// Equirectangular plane tangent at the corpus centroid.
    Local,
    /// Universal Transverse Mercator on WGS84.
    Tmerc,
}

impl std::str::FromStr for ProjectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local" => Ok(Self::Local),
            "tmerc" => Ok(Self::Tmerc),
            other => Err(Error::invalid(format!("unknown projection `{other}`"))),
        }
    }
}

/// A fitted projection plus the parameters needed to reproduce it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Projection {
    Local {
        origin_lat: f64,
        origin_lon: f64,
        radius_m: f64,
    },
    Tmerc {
        zone: u8,
        north: bool,
    },
}

/// UTM zone number (1..=60) containing `lon`.
pub fn utm_zone(lon: f64) -> u8 {
    let z = ((lon + 180.0) / 6.0).floor() as i64 + 1;
    z.clamp(1, 60) as u8
}

impl Projection {
    /// Local plane centred on the point `(lat, lon)`.
    pub fn local(origin_lat: f64, origin_lon: f64) -> Self {
        Projection::Local {
            origin_lat,
            origin_lon,
            radius_m: EARTH_RADIUS_M,
        }
    }

    /// Fits the projection to a corpus: the centroid for `Local`, the zone of
    /// the centroid longitude for `Tmerc`.
    pub fn fit(mode: ProjectionMode, trajs: &[RawTrajectory]) -> Result<Self> {
        let (mut lat, mut lon, mut n) = (0.0, 0.0, 0usize);
        for p in trajs.iter().flat_map(|t| &t.points) {
            lat += p.lat;
            lon += p.lon;
            n += 1;
        }
        if n == 0 {
            return Err(Error::invalid("cannot fit a projection to an empty corpus"));
        }
        let (lat, lon) = (lat / n as f64, lon / n as f64);
        Ok(match mode {
            ProjectionMode::Local => Projection::local(lat, lon),
            ProjectionMode::Tmerc => Projection::Tmerc {
                zone: utm_zone(lon),
                north: lat >= 0.0,
            },
        })
    }

    pub fn mode(&self) -> ProjectionMode {
        match self {
            Projection::Local { .. } => ProjectionMode::Local,
            Projection::Tmerc { .. } => ProjectionMode::Tmerc,
        }
    }

    /// Planar `(easting, northing)` in meters.
    pub fn forward(&self, lat: f64, lon: f64) -> (f64, f64) {
        match *self {
            Projection::Local {
                origin_lat,
                origin_lon,
                radius_m,
            } => {
                let x = radius_m * (lon - origin_lon).to_radians() * origin_lat.to_radians().cos();
                let y = radius_m * (lat - origin_lat).to_radians();
                (x, y)
            }
            Projection::Tmerc { zone, north } => {
                let (x, y) = transverse_mercator(lat, lon, central_meridian(zone));
                let y = if north { y } else { y + UTM_FALSE_NORTHING_SOUTH };
                (x + UTM_FALSE_EASTING, y)
            }
        }
    }

    /// Inverse of the local projection. Transverse Mercator has no inverse
    /// here; nothing downstream needs geographic coordinates back.
    pub fn inverse_local(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        match *self {
            Projection::Local {
                origin_lat,
                origin_lon,
                radius_m,
            } => {
                let lat = origin_lat + (y / radius_m).to_degrees();
                let lon = origin_lon + (x / (radius_m * origin_lat.to_radians().cos())).to_degrees();
                Some((lat, lon))
            }
            Projection::Tmerc { .. } => None,
        }
    }
}

fn central_meridian(zone: u8) -> f64 {
    f64::from(zone) * 6.0 - 183.0
}

/// Transverse Mercator series (USGS Professional Paper 1395 form) on WGS84,
/// scale `k0` applied, without false easting/northing.
fn transverse_mercator(lat: f64, lon: f64, lon0: f64) -> (f64, f64) {
    let e2 = WGS84_F * (2.0 - WGS84_F);
    let e4 = e2 * e2;
    let e6 = e4 * e2;
    let ep2 = e2 / (1.0 - e2);
    let phi = lat.to_radians();
    let (sin_phi, cos_phi) = phi.sin_cos();
    let tan_phi = sin_phi / cos_phi;

    let n = WGS84_A / (1.0 - e2 * sin_phi * sin_phi).sqrt();
    let t = tan_phi * tan_phi;
    let c = ep2 * cos_phi * cos_phi;
    let a = (lon - lon0).to_radians() * cos_phi;
    let m = WGS84_A
        * ((1.0 - e2 / 4.0 - 3.0 * e4 / 64.0 - 5.0 * e6 / 256.0) * phi
            - (3.0 * e2 / 8.0 + 3.0 * e4 / 32.0 + 45.0 * e6 / 1024.0) * (2.0 * phi).sin()
            + (15.0 * e4 / 256.0 + 45.0 * e6 / 1024.0) * (4.0 * phi).sin()
            - (35.0 * e6 / 3072.0) * (6.0 * phi).sin());

    let a2 = a * a;
    let a3 = a2 * a;
    let a4 = a3 * a;
    let a5 = a4 * a;
    let a6 = a5 * a;
    let x = UTM_K0 * n * (a + (1.0 - t + c) * a3 / 6.0 + (5.0 - 18.0 * t + t * t + 72.0 * c - 58.0 * ep2) * a5 / 120.0);
    let y = UTM_K0
        * (m + n
            * tan_phi
            * (a2 / 2.0
                + (5.0 - t + 9.0 * c + 4.0 * c * c) * a4 / 24.0
                + (61.0 - 58.0 * t + t * t + 600.0 * c - 330.0 * ep2) * a6 / 720.0));
    (x, y)
}

/// Projects every point of `traj` to meters.
///
/// Under `Tmerc`, every point must lie in the projection's zone and
/// hemisphere.
pub fn project_planar(traj: &RawTrajectory, projection: &Projection) -> Result<ProjectedTrajectory> {
    if let Projection::Tmerc { zone, north } = *projection {
        for p in &traj.points {
            let pz = utm_zone(p.lon);
            if pz != zone || (p.lat >= 0.0) != north {
                return Err(Error::Projection {
                    trajectory_id: traj.trajectory_id.clone(),
                    message: format!(
                        "point at ({}, {}) lies in zone {pz}{}, projection uses zone {zone}{}",
                        p.lat,
                        p.lon,
                        if p.lat >= 0.0 { 'N' } else { 'S' },
                        if north { 'N' } else { 'S' }
                    ),
                });
            }
        }
    }
    let points = traj
        .points
        .iter()
        .map(|p| {
            let (x, y) = projection.forward(p.lat, p.lon);
            ProjectedPoint {
                x,
                y,
                timestamp: p.timestamp,
                accuracy: p.accuracy,
            }
        })
        .collect();
    Ok(ProjectedTrajectory {
        trajectory_id: traj.trajectory_id.clone(),
        user_id: traj.user_id.clone(),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::RawPoint;

    fn traj(points: &[(f64, f64)]) -> RawTrajectory {
        RawTrajectory {
            trajectory_id: "t".into(),
            user_id: "u".into(),
            points: points
                .iter()
                .enumerate()
                .map(|(i, &(lat, lon))| RawPoint {
                    lat,
                    lon,
                    timestamp: i as i64,
                    accuracy: None,
                    user_id: "u".into(),
                })
                .collect(),
        }
    }

    /// Great-circle distance on the sphere, computed independently of the
    /// projection code.
    fn haversine(lat1: f64, lon1: f64, lat2: f64, lon2: f64) -> f64 {
        let (p1, p2) = (lat1.to_radians(), lat2.to_radians());
        let dp = p2 - p1;
        let dl = (lon2 - lon1).to_radians();
        let h = (dp / 2.0).sin().powi(2) + p1.cos() * p2.cos() * (dl / 2.0).sin().powi(2);
        2.0 * 6_371_000.0 * h.sqrt().asin()
    }

    #[test]
    fn latitude_step_matches_arc_length() {
        let oracle = haversine(45.0, 9.0, 45.001, 9.0);
        assert!((oracle - 111.1).abs() < 0.5);
        for mode in [ProjectionMode::Local, ProjectionMode::Tmerc] {
            let t = traj(&[(45.0, 9.0), (45.001, 9.0)]);
            let proj = Projection::fit(mode, &t_slice(&t)).unwrap();
            let p = project_planar(&t, &proj).unwrap();
            let dy = p.points[1].y - p.points[0].y;
            assert!((dy - 111.1).abs() <= 0.5, "{mode:?}: {dy}");
            assert!((dy - oracle).abs() <= 0.5, "{mode:?}: {dy} vs {oracle}");
        }
    }

    fn t_slice(t: &RawTrajectory) -> Vec<RawTrajectory> {
        vec![t.clone()]
    }

    #[test]
    fn origin_maps_to_origin_and_is_deterministic() {
        let proj = Projection::local(45.5, 9.2);
        assert_eq!(proj.forward(45.5, 9.2), (0.0, 0.0));
        assert_eq!(proj.forward(45.51, 9.21), proj.forward(45.51, 9.21));
        let (lat, lon) = proj.inverse_local(1234.0, -987.0).unwrap();
        let (x, y) = proj.forward(lat, lon);
        assert!((x - 1234.0).abs() < 1e-6 && (y + 987.0).abs() < 1e-6);
    }

    #[test]
    fn tmerc_rejects_zone_crossing() {
        let t = traj(&[(45.0, 8.9), (45.0, 12.1)]);
        let proj = Projection::Tmerc { zone: 32, north: true };
        let err = project_planar(&t, &proj).unwrap_err();
        assert!(matches!(err, Error::Projection { ref trajectory_id, .. } if trajectory_id == "t"));
    }

    #[test]
    fn tmerc_known_point() {
        // Central meridian of zone 32 at the equator: easting is exactly the
        // false easting, northing zero.
        let proj = Projection::Tmerc { zone: 32, north: true };
        let (x, y) = proj.forward(0.0, 9.0);
        assert!((x - 500_000.0).abs() < 1e-6 && y.abs() < 1e-6);
    }
}
