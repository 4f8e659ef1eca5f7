//! Shared fixtures for the benchmarks.

use fdasynth_core::elastic::{distance_matrix, Aligner, DistanceMatrix, Neighborhood};
use fdasynth_core::functional::CurveDataset;
use fdasynth_core::toy::{generate_toy, ToyDataSpec};

/// Two-cluster toy dataset with `per_cluster` curves each on an `m`-point grid.
pub fn toy(per_cluster: usize, m: usize) -> CurveDataset {
    let mut spec = ToyDataSpec::new(2, per_cluster, 0.05, 7);
    spec.grid_size = m;
    generate_toy(&spec).expect("valid toy spec")
}

pub fn aligner(m: usize) -> Aligner {
    Aligner::new(m, Neighborhood::default()).expect("valid grid")
}

pub fn matrix(data: &CurveDataset, delta: f64) -> DistanceMatrix {
    distance_matrix(&aligner(data.grid.len()), &data.curves, delta).expect("distance matrix")
}
