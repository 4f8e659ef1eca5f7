use std::collections::HashMap;

use fdasynth_core::elastic::{distance_matrix, Aligner, DistanceMatrix, Neighborhood};
use fdasynth_core::toy::{generate_toy, ToyDataSpec};
use fdasynth_core::tuning::cluster_curves;

fn choose2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index from the contingency table.
fn adjusted_rand(a: &[usize], b: &[usize]) -> f64 {
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| choose2(c)).sum();
    let sr: f64 = rows.values().map(|&c| choose2(c)).sum();
    let sc: f64 = cols.values().map(|&c| choose2(c)).sum();
    let expected = sr * sc / choose2(a.len() as u64);
    let max = 0.5 * (sr + sc);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[test]
fn adjusted_rand_oracle_sanity() {
    assert_eq!(adjusted_rand(&[0, 0, 1, 1], &[5, 5, 2, 2]), 1.0);
    // Hand-computed: table [[2,1],[0,3]] has index 4, row and column sums
    // 6 and 7, expected 6·7/15 = 2.8 and maximum 6.5.
    let v = adjusted_rand(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 1, 1]);
    assert!((v - 1.2 / 3.7).abs() < 1e-12);
}

#[test]
fn toy_clusters_are_recovered() {
    let spec = ToyDataSpec::new(2, 30, 0.05, 7);
    let data = generate_toy(&spec).unwrap();
    let aligner = Aligner::new(data.grid.len(), Neighborhood::default()).unwrap();
    let matrix = distance_matrix(&aligner, &data.curves, 0.5).unwrap();
    let clusters = cluster_curves(&matrix, 20).unwrap();
    let truth: Vec<usize> = (0..data.len()).map(|i| spec.label_of(i)).collect();
    let ari = adjusted_rand(&clusters.labels, &truth);
    assert!(ari >= 0.9, "ARI {ari}, sizes {:?}", clusters.sizes);
}

#[test]
fn distance_matrix_file_round_trips_bit_exactly() {
    let mut spec = ToyDataSpec::new(2, 4, 0.05, 2);
    spec.grid_size = 31;
    let data = generate_toy(&spec).unwrap();
    let aligner = Aligner::new(31, Neighborhood::default()).unwrap();
    let matrix = distance_matrix(&aligner, &data.curves, 0.3).unwrap();
    let mut bytes = Vec::new();
    matrix.write_to(&mut bytes).unwrap();
    assert_eq!(bytes.len(), 4 + 4 + 4 + 8 + 3 * 8 * 8 * 8);
    let back = DistanceMatrix::read_from(bytes.as_slice()).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(back.amplitude_matrix()), bits(matrix.amplitude_matrix()));
    assert_eq!(bits(back.phase_matrix()), bits(matrix.phase_matrix()));
    assert_eq!(bits(back.combined_matrix()), bits(matrix.combined_matrix()));
    assert_eq!(back.delta().to_bits(), 0.3f64.to_bits());

    let mut bumped = bytes.clone();
    bumped[4] = 99;
    assert!(DistanceMatrix::read_from(bumped.as_slice()).is_err());
    assert!(DistanceMatrix::read_from(&bytes[..bytes.len() - 1]).is_err());
    assert!(DistanceMatrix::read_from(&b"JUNKJUNK"[..]).is_err());
}
