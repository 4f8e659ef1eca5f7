//! Sampled functional data: the shared grid, curves, datasets, and the
//! conversion of normalized trajectories into curves.

mod spline;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ingest::{NormalizationParams, NormalizedTrajectory};

pub use spline::{smooth_spatial, smooth_temporal, MonotoneCubicSpline, NaturalCubicSpline};

/// Version written into every curve-dataset file.
pub const CURVE_FORMAT_VERSION: u32 = 1;

/// Default number of grid samples.
pub const DEFAULT_GRID_SIZE: usize = 101;

/// Uniform sampling grid on `[0, 1]`, endpoints included.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Grid {
    m: usize,
    abscissae: Vec<f64>,
}

impl Grid {
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 5 {
            return Err(Error::invalid(format!("grid needs at least 5 points, got {m}")));
        }
        let last = (m - 1) as f64;
        let abscissae = (0..m).map(|j| j as f64 / last).collect();
        Ok(Self { m, abscissae })
    }

    pub fn len(&self) -> usize {
        self.m
    }

    pub fn is_empty(&self) -> bool {
        self.m == 0
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.abscissae
    }

    /// Grid spacing `1 / (m - 1)`.
    pub fn step(&self) -> f64 {
        1.0 / (self.m - 1) as f64
    }
}

impl<'de> Deserialize<'de> for Grid {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            m: usize,
            abscissae: Vec<f64>,
        }
        let raw = Raw::deserialize(de)?;
        let expected = Grid::uniform(raw.m).map_err(D::Error::custom)?;
        if raw.abscissae.len() != raw.m {
            return Err(D::Error::custom("grid abscissae length differs from m"));
        }
        let uniform = raw
            .abscissae
            .iter()
            .zip(&expected.abscissae)
            .all(|(a, b)| (a - b).abs() <= 1e-12);
        if !uniform || raw.abscissae[0] != 0.0 || raw.abscissae[raw.m - 1] != 1.0 {
            return Err(D::Error::custom("grid abscissae are not uniform on [0, 1]"));
        }
        Ok(Grid {
            m: raw.m,
            abscissae: raw.abscissae,
        })
    }
}

/// Row-major `len × dim` matrix of function samples: one row per grid point.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    dim: usize,
    data: Vec<f64>,
}

impl Samples {
    pub fn zeros(len: usize, dim: usize) -> Self {
        assert!(dim > 0, "sample dimension must be positive");
        Self {
            dim,
            data: vec![0.0; len * dim],
        }
    }

    pub fn from_fn(len: usize, dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut out = Self::zeros(len, dim);
        for j in 0..len {
            for d in 0..dim {
                out.data[j * dim + d] = f(j, d);
            }
        }
        out
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::invalid(format!(
                "{} values cannot be split into rows of {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if dim == 0 {
            return Err(Error::invalid("samples need at least one non-empty row"));
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (j, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::invalid(format!(
                    "row {j} has {} components, expected {dim}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    /// Builds samples from one vector per component.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let dim = columns.len();
        let len = columns.first().map_or(0, Vec::len);
        if dim == 0 || columns.iter().any(|c| c.len() != len) {
            return Err(Error::invalid("columns must be non-empty and of equal length"));
        }
        Ok(Self::from_fn(len, dim, |j, d| columns[d][j]))
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.dim..(j + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn column(&self, d: usize) -> Vec<f64> {
        self.rows().map(|r| r[d]).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn same_shape(&self, other: &Samples) -> bool {
        self.dim == other.dim && self.data.len() == other.data.len()
    }

    pub fn sub(&self, other: &Samples) -> Samples {
        debug_assert!(self.same_shape(other));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Samples { dim: self.dim, data }
    }

    pub fn max_abs_diff(&self, other: &Samples) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Serialize for Samples {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        ser.collect_seq(self.rows())
    }
}

impl<'de> Deserialize<'de> for Samples {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(de)?;
        Samples::from_rows(&rows).map_err(D::Error::custom)
    }
}

/// Trapezoidal quadrature weights for a uniform grid of `m` points on `[0, 1]`.
pub fn trapezoid_weights(m: usize) -> Vec<f64> {
    let h = 1.0 / (m - 1) as f64;
    let mut w = vec![h; m];
    w[0] = 0.5 * h;
    w[m - 1] = 0.5 * h;
    w
}

/// `∫ ⟨a(x), b(x)⟩ dx` by the trapezoid rule.
pub fn inner_product(a: &Samples, b: &Samples) -> f64 {
    debug_assert!(a.same_shape(b));
    let m = a.len();
    let h = 1.0 / (m - 1) as f64;
    let mut total = 0.0;
    for (j, (ra, rb)) in a.rows().zip(b.rows()).enumerate() {
        let dot: f64 = ra.iter().zip(rb).map(|(x, y)| x * y).sum();
        let w = if j == 0 || j == m - 1 { 0.5 } else { 1.0 };
        total += w * dot;
    }
    total * h
}

/// Trapezoidal L² norm.
pub fn l2_norm(a: &Samples) -> f64 {
    inner_product(a, a).max(0.0).sqrt()
}

/// Trapezoidal L² distance.
pub fn l2_distance(a: &Samples, b: &Samples) -> f64 {
    l2_norm(&a.sub(b))
}

/// Linear interpolation of `values` (sampled on the uniform grid) at `x`,
/// written into `out`.
pub fn interpolate_into(values: &Samples, x: f64, out: &mut [f64]) {
    let m = values.len();
    let t = (x * (m - 1) as f64).clamp(0.0, (m - 1) as f64);
    let k = (t.floor() as usize).min(m - 2);
    let frac = t - k as f64;
    let (a, b) = (values.row(k), values.row(k + 1));
    for d in 0..values.dim() {
        out[d] = a[d] + (b[d] - a[d]) * frac;
    }
}

/// One sampled function on the shared grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Curve {
    pub id: String,
    pub source_id: String,
    pub values: Samples,
}

impl Curve {
    pub fn new(id: impl Into<String>, source_id: impl Into<String>, values: Samples) -> Self {
        Self {
            id: id.into(),
            source_id: source_id.into(),
            values,
        }
    }

    pub fn start(&self) -> &[f64] {
        self.values.row(0)
    }
}

/// Curves sharing one grid, plus the normalization used to produce them.
#[derive(Clone, Debug, PartialEq)]
pub struct CurveDataset {
    pub grid: Grid,
    pub normalization: NormalizationParams,
    pub metadata: BTreeMap<String, String>,
    pub curves: Vec<Curve>,
}

#[derive(Serialize, Deserialize)]
struct CurveFile {
    format_version: u32,
    grid: Grid,
    normalization: NormalizationParams,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
    curves: Vec<Curve>,
}

impl CurveDataset {
    pub fn new(grid: Grid, normalization: NormalizationParams, curves: Vec<Curve>) -> Result<Self> {
        let dataset = Self {
            grid,
            normalization,
            metadata: BTreeMap::new(),
            curves,
        };
        dataset.validate()?;
        Ok(dataset)
    }

    pub fn len(&self) -> usize {
        self.curves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.curves.is_empty()
    }

    /// Component count of the curves (zero for an empty dataset).
    pub fn dim(&self) -> usize {
        self.curves.first().map_or(0, |c| c.values.dim())
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.grid.len();
        let dim = self.dim();
        let mut ids = HashSet::with_capacity(self.curves.len());
        for curve in &self.curves {
            if !ids.insert(curve.id.as_str()) {
                return Err(Error::invalid(format!("duplicate curve id `{}`", curve.id)));
            }
            if curve.values.len() != m || curve.values.dim() != dim {
                return Err(Error::invalid(format!(
                    "curve `{}` is {}×{}, dataset grid is {m}×{dim}",
                    curve.id,
                    curve.values.len(),
                    curve.values.dim()
                )));
            }
            if !curve.values.is_finite() {
                return Err(Error::invalid(format!("curve `{}` has non-finite values", curve.id)));
            }
        }
        Ok(())
    }

    /// Dataset containing `curves` on this dataset's grid and normalization.
    pub fn with_curves(&self, curves: Vec<Curve>) -> Result<Self> {
        let mut out = Self::new(self.grid.clone(), self.normalization.clone(), curves)?;
        out.metadata = self.metadata.clone();
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CurveFile {
            format_version: CURVE_FORMAT_VERSION,
            grid: self.grid.clone(),
            normalization: self.normalization.clone(),
            metadata: self.metadata.clone(),
            curves: self.curves.clone(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let version: VersionProbe = serde_json::from_str(text)?;
        if version.format_version != CURVE_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "curve file version {} (supported: {CURVE_FORMAT_VERSION})",
                version.format_version
            )));
        }
        let file: CurveFile = serde_json::from_str(text)?;
        let mut dataset = Self::new(file.grid, file.normalization, file.curves)?;
        dataset.metadata = file.metadata;
        Ok(dataset)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

#[derive(Deserialize)]
struct VersionProbe {
    format_version: u32,
}

/// Knot abscissae `j / (n - 1)` for a trajectory of `n` records.
pub fn record_order_knots(n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n).map(|j| j as f64 / last).collect()
}

/// Converts one normalized trajectory into a curve on `grid`.
pub fn trajectory_to_curve(traj: &NormalizedTrajectory, grid: &Grid) -> Result<Curve> {
    let wrap = |e: Error| Error::Trajectory {
        id: traj.trajectory_id.clone(),
        source: Box::new(e),
    };
    if traj.points.len() < 2 {
        return Err(wrap(Error::invalid("at least two points are required")));
    }
    let knots = record_order_knots(traj.points.len());
    let component = |d: usize| traj.points.iter().map(|p| p[d]).collect::<Vec<_>>();
    let x = smooth_spatial(&knots, &component(0), grid.abscissae()).map_err(wrap)?;
    let y = smooth_spatial(&knots, &component(1), grid.abscissae()).map_err(wrap)?;
    let t = smooth_temporal(&knots, &component(2), grid.abscissae()).map_err(wrap)?;
    let values = Samples::from_columns(&[x, y, t]).map_err(wrap)?;
    Ok(Curve::new(
        traj.trajectory_id.clone(),
        traj.trajectory_id.clone(),
        values,
    ))
}

/// One curve per trajectory, in input order.
pub fn build_dataset(
    trajs: &[NormalizedTrajectory],
    normalization: &NormalizationParams,
    grid: &Grid,
) -> Result<CurveDataset> {
    let curves = trajs
        .par_iter()
        .map(|t| trajectory_to_curve(t, grid))
        .collect::<Result<Vec<_>>>()?;
    let mut dataset = CurveDataset::new(grid.clone(), normalization.clone(), curves)?;
    dataset.metadata.insert("source".into(), "trajectories".into());
    Ok(dataset)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::Orientation;

    fn params() -> NormalizationParams {
        NormalizationParams {
            min_c1: 0.0,
            max_c1: 1000.0,
            min_c2: 0.0,
            max_c2: 1000.0,
            min_t: 0.0,
            max_t: 600.0,
            orientation: Orientation::MaxToZero,
        }
    }

    #[test]
    fn grid_rejects_tiny() {
        assert!(Grid::uniform(4).is_err());
        let g = Grid::uniform(5).unwrap();
        assert_eq!(g.abscissae(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn linear_trajectory_gives_ramps() {
        let grid = Grid::uniform(11).unwrap();
        let traj = NormalizedTrajectory {
            trajectory_id: "a".into(),
            user_id: "u".into(),
            start_time: 0,
            points: (0..6)
                .map(|j| {
                    let x = j as f64 / 5.0;
                    [x, 1.0 - x, x]
                })
                .collect(),
        };
        let ds = build_dataset(&[traj], &params(), &grid).unwrap();
        let c = &ds.curves[0];
        for (j, x) in grid.abscissae().iter().enumerate() {
            let r = c.values.row(j);
            assert!((r[0] - x).abs() < 1e-12);
            assert!((r[1] - (1.0 - x)).abs() < 1e-12);
            assert!((r[2] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn curve_errors_carry_trajectory_id() {
        let grid = Grid::uniform(11).unwrap();
        let traj = NormalizedTrajectory {
            trajectory_id: "bad".into(),
            user_id: "u".into(),
            start_time: 0,
            points: vec![[0.0, 0.0, 0.5], [1.0, 1.0, 0.2]],
        };
        let err = build_dataset(&[traj], &params(), &grid).unwrap_err();
        assert!(err.to_string().contains("bad"), "{err}");
    }

    #[test]
    fn dataset_rejects_duplicate_ids_and_versions() {
        let grid = Grid::uniform(5).unwrap();
        let c = Curve::new("x", "x", Samples::zeros(5, 3));
        assert!(CurveDataset::new(grid.clone(), params(), vec![c.clone(), c.clone()]).is_err());

        let ds = CurveDataset::new(grid, params(), vec![c]).unwrap();
        let text = ds
            .to_json()
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":9");
        assert!(matches!(CurveDataset::from_json(&text), Err(Error::Format(_))));
    }

    #[test]
    fn trapezoid_norm_of_constant() {
        let s = Samples::from_fn(101, 1, |_, _| 2.0);
        assert!((l2_norm(&s) - 2.0).abs() < 1e-14);
    }
}
