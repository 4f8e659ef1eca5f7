//! Seeded synthetic corpora for tests, benchmarks and end-to-end runs.
//!
//! Each cluster follows a template path with its own start, heading and bend.
//! Curves within a cluster come in groups of repeated trips along one route:
//! the route deviates smoothly from the template by `noise_scale`, and each
//! trip adds a smaller smooth jitter on top.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{Curve, CurveDataset, Grid, Samples};
use crate::ingest::{NormalizationParams, Orientation, Projection, RawPoint, RawTrajectory};

/// Trips sharing one route.
pub const TRIPS_PER_ROUTE: usize = 2;
/// Template path length, meters.
const PATH_LENGTH_M: f64 = 5000.0;
/// Template trip duration, seconds.
const DURATION_S: f64 = 1800.0;
/// Spatial jitter of a trip relative to the route deviation.
const TRIP_JITTER: f64 = 0.1;
/// Pace variation of a trip relative to the route deviation.
const TRIP_TIMING: f64 = 0.1;
/// Sine modes in each smooth perturbation.
const MODES: usize = 3;
/// Reference point for [`toy_signals`].
const ORIGIN_LAT: f64 = 45.4642;
const ORIGIN_LON: f64 = 9.19;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyDataSpec {
    pub n_clusters: usize,
    pub curves_per_cluster: usize,
    pub noise_scale: f64,
    pub seed: u64,
    #[serde(default = "default_grid_size")]
    pub grid_size: usize,
}

fn default_grid_size() -> usize {
    101
}

impl ToyDataSpec {
    pub fn new(n_clusters: usize, curves_per_cluster: usize, noise_scale: f64, seed: u64) -> Self {
        Self {
            n_clusters,
            curves_per_cluster,
            noise_scale,
            seed,
            grid_size: default_grid_size(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.curves_per_cluster == 0 {
            return Err(Error::invalid("toy data needs at least one cluster and one curve"));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid(format!(
                "noise scale {} must be finite and non-negative",
                self.noise_scale
            )));
        }
        Grid::uniform(self.grid_size)?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.n_clusters * self.curves_per_cluster
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Generating cluster of curve `index`; curves are emitted cluster by cluster.
    pub fn label_of(&self, index: usize) -> usize {
        index / self.curves_per_cluster
    }
}

/// Smooth perturbation `Σ_k c_k sin(kπs) / k` of the path and the time law.
#[derive(Clone, Debug)]
struct Perturbation {
    x: [f64; MODES],
    y: [f64; MODES],
    /// Added to the time-law wobble amplitude.
    wobble: f64,
    /// Relative change of duration.
    stretch: f64,
}

impl Perturbation {
    fn draw(rng: &mut ChaCha8Rng, spatial: f64, timing: f64) -> Self {
        let mut normal = || -> f64 { rng.sample(StandardNormal) };
        Self {
            x: [normal(), normal(), normal()].map(|c| c * spatial * PATH_LENGTH_M),
            y: [normal(), normal(), normal()].map(|c| c * spatial * PATH_LENGTH_M),
            wobble: normal() * timing * 4.0,
            stretch: normal() * timing * 2.0,
        }
    }

    fn offset(&self, s: f64) -> (f64, f64) {
        let mut dx = 0.0;
        let mut dy = 0.0;
        for k in 0..MODES {
            let b = ((k + 1) as f64 * PI * s).sin() / (k + 1) as f64;
            dx += self.x[k] * b;
            dy += self.y[k] * b;
        }
        (dx, dy)
    }
}

#[derive(Clone, Debug)]
struct Template {
    start: (f64, f64),
    heading: f64,
    bend: f64,
    wobble: f64,
}

/// `τ + a sin(2πτ)/2π`, increasing on `[0, 1]` for `|a| < 1`.
fn wobble(tau: f64, a: f64) -> f64 {
    tau + a.clamp(-0.8, 0.8) * (2.0 * PI * tau).sin() / (2.0 * PI)
}

impl Template {
    /// Position (m) and elapsed time (s) at record fraction `tau ∈ [0, 1]`.
    ///
    /// Cluster, route and trip pace add up to one warp `w(τ)` that moves
    /// along the path and through time together.
    fn point(&self, tau: f64, route: &Perturbation, trip: &Perturbation) -> [f64; 3] {
        let w = wobble(tau, self.wobble + route.wobble + trip.wobble);
        let s = w;
        let (c, sn) = (self.heading.cos(), self.heading.sin());
        let along = PATH_LENGTH_M * s;
        let across = self.bend * PATH_LENGTH_M * (PI * s).sin();
        let (rx, ry) = route.offset(s);
        let (tx, ty) = trip.offset(s);
        let x = self.start.0 + along * c - across * sn + rx + tx;
        let y = self.start.1 + along * sn + across * c + ry + ty;
        let duration = DURATION_S * (1.0 + route.stretch + trip.stretch).max(0.2);
        [x, y, duration * w]
    }
}

/// Planar points (meters, elapsed seconds) at `positions` for every curve,
/// with ids, cluster by cluster.
fn generate_planar(spec: &ToyDataSpec, positions: &[f64]) -> Result<Vec<(String, Vec<[f64; 3]>)>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let base_heading = rng.random::<f64>() * 2.0 * PI;
    let mut out = Vec::with_capacity(spec.len());
    for g in 0..spec.n_clusters {
        let angle = 2.0 * PI * g as f64 / spec.n_clusters as f64;
        let template = Template {
            start: (2000.0 * (angle + 0.5).cos(), 2000.0 * (angle + 0.5).sin()),
            heading: base_heading + angle,
            bend: rng.random_range(-0.25..0.25),
            // Distinct pace per cluster so timing separates clusters as
            // well as shape does.
            wobble: 0.5 * (angle + 0.5).sin() + rng.random_range(-0.05..0.05),
        };
        let scale = spec.noise_scale;
        let mut route = Perturbation::draw(&mut rng, scale, scale);
        for i in 0..spec.curves_per_cluster {
            if i > 0 && i % TRIPS_PER_ROUTE == 0 {
                route = Perturbation::draw(&mut rng, scale, scale);
            }
            let trip = Perturbation::draw(&mut rng, scale * TRIP_JITTER, scale * TRIP_TIMING);
            let points = positions.iter().map(|&s| template.point(s, &route, &trip)).collect();
            out.push((format!("toy-{g}-{i:03}"), points));
        }
    }
    Ok(out)
}

/// Toy curve dataset on a uniform grid, normalized with `max0` orientation
/// over the generated ranges.
pub fn generate_toy(spec: &ToyDataSpec) -> Result<CurveDataset> {
    let grid = Grid::uniform(spec.grid_size)?;
    let planar = generate_planar(spec, grid.abscissae())?;
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in planar.iter().flat_map(|(_, pts)| pts) {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let normalization = NormalizationParams {
        min_c1: lo[0],
        max_c1: hi[0],
        min_c2: lo[1],
        max_c2: hi[1],
        min_t: 0.0,
        max_t: hi[2],
        orientation: Orientation::MaxToZero,
    };
    normalization.validate()?;
    let curves = planar
        .into_iter()
        .map(|(id, pts)| {
            let rows: Vec<Vec<f64>> = pts.iter().map(|p| normalization.normalize_point(*p).to_vec()).collect();
            Ok(Curve::new(id.clone(), id, Samples::from_rows(&rows)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut dataset = CurveDataset::new(grid, normalization, curves)?;
    dataset.metadata.insert("source".into(), "toy".into());
    dataset.metadata.insert("seed".into(), spec.seed.to_string());
    Ok(dataset)
}

/// The same corpus as raw GPS fixes: `points_per_curve` fixes per trip,
/// one user per route, a trip per hour, positions mapped to degrees with the
/// local projection around a fixed origin.
pub fn toy_signals(spec: &ToyDataSpec, points_per_curve: usize) -> Result<Vec<RawTrajectory>> {
    if points_per_curve < 2 {
        return Err(Error::invalid("at least two fixes per trip are required"));
    }
    let positions: Vec<f64> = (0..points_per_curve)
        .map(|j| j as f64 / (points_per_curve - 1) as f64)
        .collect();
    let projection = Projection::local(ORIGIN_LAT, ORIGIN_LON);
    let start = 1_700_000_000i64;
    generate_planar(spec, &positions)?
        .into_iter()
        .enumerate()
        .map(|(n, (id, pts))| {
            let g = spec.label_of(n);
            let route = (n % spec.curves_per_cluster) / TRIPS_PER_ROUTE;
            let user_id = format!("user-{g}-{route}");
            let t0 = start + 3600 * n as i64;
            let points = pts
                .iter()
                .map(|p| {
                    let (lat, lon) = projection
                        .inverse_local(p[0], p[1])
                        .ok_or_else(|| Error::numerical("toy point outside the local projection"))?;
                    Ok(RawPoint {
                        lat,
                        lon,
                        timestamp: t0 + p[2].round() as i64,
                        accuracy: Some(10.0),
                        user_id: user_id.clone(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(RawTrajectory {
                trajectory_id: id,
                user_id,
                points,
            })
        })
        .collect()
}

/// Writes trajectories in the signals CSV layout read by ingest.
pub fn write_signals_csv<W: std::io::Write>(out: W, trajs: &[RawTrajectory]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["user_id", "trajectory_id", "timestamp", "lat", "lon", "accuracy"])?;
    for t in trajs {
        for p in &t.points {
            w.write_record([
                p.user_id.clone(),
                t.trajectory_id.clone(),
                p.timestamp.to_string(),
                format!("{:.8}", p.lat),
                format!("{:.8}", p.lon),
                p.accuracy.map(|a| a.to_string()).unwrap_or_default(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sizes_ids_and_time_monotone() {
        let spec = ToyDataSpec::new(3, 4, 0.05, 1);
        let d = generate_toy(&spec).unwrap();
        assert_eq!(d.len(), 12);
        assert_eq!(d.dim(), 3);
        assert_eq!(d.curves[5].id, "toy-1-001");
        for c in &d.curves {
            let t = c.values.column(2);
            assert!(t.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn zero_noise_clusters_are_identical() {
        let d = generate_toy(&ToyDataSpec::new(2, 3, 0.0, 4)).unwrap();
        assert_eq!(d.curves[0].values, d.curves[2].values);
        assert_ne!(d.curves[0].values, d.curves[3].values);
    }

    #[test]
    fn seeds_differ() {
        let a = generate_toy(&ToyDataSpec::new(2, 3, 0.05, 1)).unwrap();
        let b = generate_toy(&ToyDataSpec::new(2, 3, 0.05, 2)).unwrap();
        assert_ne!(a.curves[0].values, b.curves[0].values);
    }

    #[test]
    fn invalid_specs() {
        assert!(generate_toy(&ToyDataSpec::new(0, 3, 0.05, 1)).is_err());
        assert!(generate_toy(&ToyDataSpec::new(2, 3, -1.0, 1)).is_err());
    }
}
