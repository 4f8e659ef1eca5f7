//! Utility and privacy checks for a synthetic dataset against its original:
//! permutation tests on means and covariances, a nearest-neighbor privacy
//! audit, hexagonal visit counts and per-curve travel statistics.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic::{cross_distances, Aligner, DistanceMatrix, Srvf};
use crate::error::{Error, Result};
use crate::functional::{interpolate_into, trapezoid_weights, Curve, CurveDataset, Samples};
use crate::ingest::NormalizationParams;
use crate::karcher::{weighted_karcher_mean, KarcherConfig, WeightedSet};
use crate::stats::{mean, median, sample_sd};

/// Default long diagonal of a heatmap hexagon, km (`√3 / 3`).
pub const DEFAULT_HEX_DIAGONAL_KM: f64 = 0.577_350_269_189_625_8;
/// Default points drawn from each curve for the heatmap.
pub const DEFAULT_HEX_SAMPLES: usize = 25;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PermutationTestResult {
    pub statistic_observed: f64,
    pub statistic_null: Vec<f64>,
    pub p_value: f64,
    pub permutations: usize,
    pub seed: u64,
}

/// `(#{null ≥ observed} + 1) / (permutations + 1)`.
pub fn permutation_p_value(observed: f64, null: &[f64]) -> f64 {
    let exceed = null.iter().filter(|v| **v >= observed).count();
    (exceed + 1) as f64 / (null.len() + 1) as f64
}

/// Label assignment of permutation `index`: the first `n1` pooled indices
/// form group one.
pub fn permuted_labels(n: usize, seed: u64, index: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng);
    idx
}

fn run_permutations(
    n1: usize,
    n2: usize,
    n_perm: usize,
    seed: u64,
    observed: f64,
    statistic: impl Fn(&[usize], &[usize]) -> Result<f64> + Sync,
) -> Result<PermutationTestResult> {
    if n_perm < 1 {
        return Err(Error::invalid("at least one permutation is required"));
    }
    let null = (0..n_perm)
        .into_par_iter()
        .map(|b| {
            let idx = permuted_labels(n1 + n2, seed, b);
            statistic(&idx[..n1], &idx[n1..])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PermutationTestResult {
        statistic_observed: observed,
        p_value: permutation_p_value(observed, &null),
        statistic_null: null,
        permutations: n_perm,
        seed,
    })
}

fn check_groups(a: &[Curve], b: &[Curve]) -> Result<()> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("both datasets must be non-empty"));
    }
    let shape = |c: &Curve| (c.values.len(), c.values.dim());
    let s = shape(&a[0]);
    if a.iter().chain(b).any(|c| shape(c) != s) {
        return Err(Error::invalid("datasets must share one grid"));
    }
    Ok(())
}

/// Settings for the Karcher-mean permutation test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanTestConfig {
    pub permutations: usize,
    pub delta: f64,
    pub seed: u64,
    pub karcher: KarcherConfig,
}

/// Permutation test of equal means: the statistic is the combined elastic
/// distance between the two unweighted Karcher means.
pub fn mean_permutation_test(
    aligner: &Aligner,
    orig: &[Srvf],
    synth: &[Srvf],
    config: &MeanTestConfig,
) -> Result<PermutationTestResult> {
    if orig.is_empty() || synth.is_empty() {
        return Err(Error::invalid("both datasets must be non-empty"));
    }
    if !(0.0..=1.0).contains(&config.delta) {
        return Err(Error::invalid(format!("delta {} outside [0, 1]", config.delta)));
    }
    let statistic = |a: &[&Srvf], b: &[&Srvf]| -> Result<f64> {
        let ma = weighted_karcher_mean(aligner, &WeightedSet::uniform(a.to_vec())?, &config.karcher)?;
        let mb = weighted_karcher_mean(aligner, &WeightedSet::uniform(b.to_vec())?, &config.karcher)?;
        Ok(aligner.distance(&ma.mean, &mb.mean).combined(config.delta))
    };
    let pooled: Vec<&Srvf> = orig.iter().chain(synth).collect();
    let observed = statistic(&pooled[..orig.len()], &pooled[orig.len()..])?;
    run_permutations(
        orig.len(),
        synth.len(),
        config.permutations,
        config.seed,
        observed,
        |g1, g2| {
            let a: Vec<&Srvf> = g1.iter().map(|&i| pooled[i]).collect();
            let b: Vec<&Srvf> = g2.iter().map(|&i| pooled[i]).collect();
            statistic(&a, &b)
        },
    )
}

/// Curve samples flattened to one vector per curve with the square roots of
/// the trapezoid weights absorbed, so plain dot products are grid-weighted
/// inner products.
pub fn weighted_vectors(curves: &[Curve]) -> Vec<Vec<f64>> {
    let Some(first) = curves.first() else {
        return Vec::new();
    };
    let (m, p) = (first.values.len(), first.values.dim());
    let w: Vec<f64> = trapezoid_weights(m).into_iter().map(f64::sqrt).collect();
    curves
        .iter()
        .map(|c| {
            let mut v = Vec::with_capacity(m * p);
            for (j, row) in c.values.rows().enumerate() {
                v.extend(row.iter().map(|x| x * w[j]));
            }
            v
        })
        .collect()
}

/// Hilbert–Schmidt distance between the sample covariance operators of the
/// two index groups, each centered on its own mean, computed from the Gram
/// matrix `gram` (row-major, `n × n`) of the pooled weighted vectors.
pub fn hs_distance_from_gram(gram: &[f64], n: usize, a: &[usize], b: &[usize]) -> f64 {
    // Centered cross inner products between members of `x` and `y`:
    // G_ij − mean_k G_kj − mean_l G_il + mean_kl G_kl, k over x, l over y.
    let centered = |x: &[usize], y: &[usize]| -> f64 {
        let (nx, ny) = (x.len() as f64, y.len() as f64);
        let col_mean: Vec<f64> = y
            .iter()
            .map(|&j| x.iter().map(|&k| gram[k * n + j]).sum::<f64>() / nx)
            .collect();
        let row_mean: Vec<f64> = x
            .iter()
            .map(|&i| y.iter().map(|&l| gram[i * n + l]).sum::<f64>() / ny)
            .collect();
        let grand = row_mean.iter().sum::<f64>() / nx;
        let mut total = 0.0;
        for (ii, &i) in x.iter().enumerate() {
            for (jj, &j) in y.iter().enumerate() {
                let c = gram[i * n + j] - col_mean[jj] - row_mean[ii] + grand;
                total += c * c;
            }
        }
        total
    };
    let da = (a.len() as f64 - 1.0).max(1.0);
    let db = (b.len() as f64 - 1.0).max(1.0);
    let sq = centered(a, a) / (da * da) + centered(b, b) / (db * db) - 2.0 * centered(a, b) / (da * db);
    sq.max(0.0).sqrt()
}

fn gram_matrix(vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = vectors.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| vectors[i].iter().zip(&vectors[j]).map(|(x, y)| x * y).sum())
                .collect()
        })
        .collect();
    rows.concat()
}

/// Permutation test of equal covariance operators under the Hilbert–Schmidt
/// distance. Curves are used as sampled, without alignment.
pub fn covariance_permutation_test(
    orig: &[Curve],
    synth: &[Curve],
    permutations: usize,
    seed: u64,
) -> Result<PermutationTestResult> {
    check_groups(orig, synth)?;
    let pooled: Vec<Curve> = orig.iter().chain(synth).cloned().collect();
    let n = pooled.len();
    let gram = gram_matrix(&weighted_vectors(&pooled));
    let a: Vec<usize> = (0..orig.len()).collect();
    let b: Vec<usize> = (orig.len()..n).collect();
    let observed = hs_distance_from_gram(&gram, n, &a, &b);
    run_permutations(orig.len(), synth.len(), permutations, seed, observed, |g1, g2| {
        Ok(hs_distance_from_gram(&gram, n, g1, g2))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyAudit {
    pub nn_orig_orig: Vec<f64>,
    pub nn_synth_orig: Vec<f64>,
    pub median_orig_orig: f64,
    pub median_synth_orig: f64,
    /// `median_synth_orig / median_orig_orig`; infinite when only the
    /// denominator is zero, zero when both are.
    pub ratio: f64,
    pub pass: bool,
}

/// Nearest-neighbor distances: original to the closest other original
/// (from `matrix`), and synthetic to the closest original (aligned here).
pub fn privacy_audit(
    aligner: &Aligner,
    orig: &[Srvf],
    synth: &[Srvf],
    matrix: &DistanceMatrix,
    delta: f64,
) -> Result<PrivacyAudit> {
    let n = orig.len();
    if n < 2 {
        return Err(Error::invalid("privacy audit needs at least two original curves"));
    }
    if matrix.len() != n {
        return Err(Error::invalid("distance matrix does not match the original dataset"));
    }
    let matrix = if matrix.delta() == delta {
        matrix.clone()
    } else {
        matrix.remix(delta)?
    };
    let nn_orig_orig = crate::tuning::nearest_neighbor_distances(&matrix);
    let cross = cross_distances(aligner, synth, orig);
    let nn_synth_orig: Vec<f64> = cross
        .chunks(n)
        .map(|row| row.iter().map(|d| d.combined(delta)).fold(f64::INFINITY, f64::min))
        .collect();
    Ok(audit_from_distances(nn_orig_orig, nn_synth_orig))
}

pub fn audit_from_distances(nn_orig_orig: Vec<f64>, nn_synth_orig: Vec<f64>) -> PrivacyAudit {
    let oo = median(&nn_orig_orig);
    let so = median(&nn_synth_orig);
    let ratio = if oo > 0.0 {
        so / oo
    } else if so > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    PrivacyAudit {
        nn_orig_orig,
        nn_synth_orig,
        median_orig_orig: oo,
        median_synth_orig: so,
        ratio,
        pass: ratio >= 1.0,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HexCell {
    pub q: i64,
    pub r: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HexHeatmap {
    pub cell_diagonal_km: f64,
    /// Planar origin of the hexagon lattice, meters.
    pub origin: [f64; 2],
    pub counts: BTreeMap<HexCell, u64>,
    pub total: u64,
}

impl HexHeatmap {
    /// `q,r,center_x_m,center_y_m,count` rows in cell order.
    pub fn to_csv(&self) -> String {
        let radius = self.cell_diagonal_km * 500.0;
        let mut out = String::from("q,r,center_x_m,center_y_m,count\n");
        for (cell, count) in &self.counts {
            let (x, y) = hex_center(*cell, radius);
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                cell.q,
                cell.r,
                x + self.origin[0],
                y + self.origin[1],
                count
            ));
        }
        out
    }
}

/// Flat-top hexagon containing `(x, y)` for circumradius `radius`.
pub fn hex_cell(x: f64, y: f64, radius: f64) -> HexCell {
    let q = (2.0 / 3.0) * x / radius;
    let r = (-x / 3.0 + 3f64.sqrt() / 3.0 * y) / radius;
    let s = -q - r;
    let (mut rq, mut rr, rs) = (q.round(), r.round(), s.round());
    let (dq, dr, ds) = ((rq - q).abs(), (rr - r).abs(), (rs - s).abs());
    if dq > dr && dq > ds {
        rq = -rr - rs;
    } else if dr > ds {
        rr = -rq - rs;
    }
    HexCell {
        q: rq as i64,
        r: rr as i64,
    }
}

pub fn hex_center(cell: HexCell, radius: f64) -> (f64, f64) {
    let (q, r) = (cell.q as f64, cell.r as f64);
    (radius * 1.5 * q, radius * 3f64.sqrt() * (r + q / 2.0))
}

/// Values of `curve` at `k` evenly spaced positions of `[0, 1]`.
pub fn resample(values: &Samples, k: usize) -> Samples {
    let mut out = Samples::zeros(k, values.dim());
    for s in 0..k {
        let x = if k == 1 { 0.0 } else { s as f64 / (k - 1) as f64 };
        interpolate_into(values, x, out.row_mut(s));
    }
    out
}

/// Counts of curve points per flat-top hexagon, with the lattice anchored at
/// the centre of the normalization bounding box.
pub fn hex_heatmap(
    dataset: &CurveDataset,
    normalization: &NormalizationParams,
    cell_diagonal_km: f64,
    samples_per_curve: usize,
) -> Result<HexHeatmap> {
    if !(cell_diagonal_km > 0.0 && cell_diagonal_km.is_finite()) || samples_per_curve == 0 {
        return Err(Error::invalid("hex diagonal and sample count must be positive"));
    }
    let radius = cell_diagonal_km * 500.0;
    let origin = [
        0.5 * (normalization.min_c1 + normalization.max_c1),
        0.5 * (normalization.min_c2 + normalization.max_c2),
    ];
    let mut counts = BTreeMap::new();
    let mut total = 0u64;
    for c in &dataset.curves {
        for row in resample(&c.values, samples_per_curve).rows() {
            let x = normalization.denormalize_value(0, row[0]) - origin[0];
            let y = normalization.denormalize_value(1, row[1]) - origin[1];
            *counts.entry(hex_cell(x, y, radius)).or_insert(0u64) += 1;
            total += 1;
        }
    }
    Ok(HexHeatmap {
        cell_diagonal_km,
        origin,
        counts,
        total,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSummary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub sd: f64,
}

impl FeatureSummary {
    fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        Some(Self {
            min: xs.iter().copied().fold(f64::INFINITY, f64::min),
            max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean: mean(xs),
            sd: sample_sd(xs),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub curves: usize,
    pub distance_km: Vec<f64>,
    pub duration_min: Vec<f64>,
    pub distance_summary: Option<FeatureSummary>,
    pub duration_summary: Option<FeatureSummary>,
}

/// Planar polyline length (km) and elapsed time (minutes) of each curve
/// after mapping back to meters and seconds.
pub fn feature_stats(dataset: &CurveDataset, normalization: &NormalizationParams) -> FeatureStats {
    let mut distance_km = Vec::with_capacity(dataset.len());
    let mut duration_min = Vec::with_capacity(dataset.len());
    for c in &dataset.curves {
        let pts: Vec<[f64; 3]> = c
            .values
            .rows()
            .map(|r| normalization.denormalize_point([r[0], r[1], r.get(2).copied().unwrap_or(0.0)]))
            .collect();
        let length: f64 = pts
            .windows(2)
            .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
            .sum();
        distance_km.push(length / 1000.0);
        let (first, last) = (pts[0][2], pts[pts.len() - 1][2]);
        duration_min.push((last - first) / 60.0);
    }
    FeatureStats {
        curves: dataset.len(),
        distance_summary: FeatureSummary::of(&distance_km),
        duration_summary: FeatureSummary::of(&duration_min),
        distance_km,
        duration_min,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn p_value_add_one() {
        assert_eq!(permutation_p_value(1.0, &[0.5, 2.0, 1.0, 0.1]), 3.0 / 5.0);
        assert_eq!(permutation_p_value(9.0, &[0.5, 2.0]), 1.0 / 3.0);
    }

    #[test]
    fn hex_rounding_at_centres_and_origin() {
        let r = 100.0;
        assert_eq!(hex_cell(0.0, 0.0, r), HexCell { q: 0, r: 0 });
        for cell in [HexCell { q: 2, r: -1 }, HexCell { q: -3, r: 4 }, HexCell { q: 0, r: 1 }] {
            let (x, y) = hex_center(cell, r);
            assert_eq!(hex_cell(x, y, r), cell);
            // Points just inside the inscribed circle stay in the cell.
            let inner = r * 3f64.sqrt() / 2.0 * 0.99;
            for k in 0..12 {
                let a = k as f64 * std::f64::consts::PI / 6.0;
                assert_eq!(hex_cell(x + inner * a.cos(), y + inner * a.sin(), r), cell);
            }
        }
    }

    #[test]
    fn audit_edge_ratios() {
        assert_eq!(audit_from_distances(vec![0.2, 0.4], vec![0.0, 0.0]).ratio, 0.0);
        assert!(!audit_from_distances(vec![0.2, 0.4], vec![0.0, 0.0]).pass);
        assert_eq!(
            audit_from_distances(vec![0.0, 0.0], vec![0.1, 0.3]).ratio,
            f64::INFINITY
        );
        let a = audit_from_distances(vec![0.1, 0.2, 0.3], vec![0.4, 0.6]);
        assert_eq!(a.median_synth_orig, 0.5);
        assert!((a.ratio - 2.5).abs() < 1e-12);
    }
}
