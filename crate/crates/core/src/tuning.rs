//! Hyperparameter selection: the distance mixing weight by a cophenetic
//! correlation sweep, clusters by a dynamic dendrogram cut, and `(K, α₀)` by
//! the two indicator phases.

use std::sync::atomic::{AtomicU64, Ordering};

use kodama::{linkage, Method};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic::{cross_distances, pairwise_distances, srvfs_of, Aligner, DistanceMatrix, Srvf};
use crate::error::{Error, Result};
use crate::functional::CurveDataset;
use crate::stats::{pearson, quantile, upper_triangle};
use crate::synthesis::{synthesize_with_srvfs, KarcherSettings, Kernel, SynthesisConfig};

/// A `|difference|` range below this marks the sweep as flat.
pub const FLAT_SWEEP: f64 = 0.02;
/// Default minimum cluster size for the dynamic cut.
pub const DEFAULT_MIN_CLUSTER_SIZE: usize = 20;
/// Default elbow ratio: a forward difference below this fraction of the
/// largest one marks stabilization.
pub const DEFAULT_ELBOW_RATIO: f64 = 0.25;

/// One merge of a complete-linkage dendrogram. Leaves are `0..n`; the node
/// created by merge `s` is `n + s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    pub size: usize,
}

/// Complete-linkage merges of a symmetric `n × n` row-major matrix.
pub fn complete_linkage(matrix: &[f64], n: usize) -> Vec<Merge> {
    let mut condensed = upper_triangle(matrix, n);
    let dendrogram = linkage(&mut condensed, n, Method::Complete);
    dendrogram
        .steps()
        .iter()
        .map(|s| Merge {
            left: s.cluster1,
            right: s.cluster2,
            height: s.dissimilarity,
            size: s.size,
        })
        .collect()
}

fn members_of(merges: &[Merge], n: usize) -> Vec<Vec<usize>> {
    let mut members: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for m in merges {
        let mut v = members[m.left].clone();
        v.extend_from_slice(&members[m.right]);
        members.push(v);
    }
    members
}

/// Cophenetic matrix: entry `(i, j)` is the height at which `i` and `j`
/// first share a cluster.
pub fn cophenetic(merges: &[Merge], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    let members = members_of(merges, n);
    for m in merges {
        for &a in &members[m.left] {
            for &b in &members[m.right] {
                out[a * n + b] = m.height;
                out[b * n + a] = m.height;
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweepResult {
    pub deltas: Vec<f64>,
    pub coph_corr_amp: Vec<f64>,
    pub coph_corr_phase: Vec<f64>,
    pub abs_diff: Vec<f64>,
    /// Whether the mixed distance at each `δ` is positive for every pair of
    /// curves with a positive amplitude or phase distance.
    pub separating: Vec<bool>,
    pub chosen_delta: f64,
    pub flat_flag: bool,
    pub warnings: Vec<String>,
}

/// For each `δ`, correlates the cophenetic matrix of the complete-linkage
/// tree on the mixed distance with the amplitude and phase matrices, and
/// picks the `δ` where the two correlations are closest (ties to the larger
/// `δ`).
///
/// Only separating `δ` values are eligible: at an endpoint the mixed distance
/// collapses to one semi-distance and can be zero between different curves,
/// which leaves neighbor search without an order. When no `δ` separates, the
/// whole grid is eligible and a warning is recorded.
pub fn tune_delta(matrix: &DistanceMatrix, deltas: &[f64]) -> Result<DeltaSweepResult> {
    let n = matrix.len();
    if n < 3 {
        return Err(Error::invalid(format!(
            "cophenetic sweep needs at least 3 curves, got {n}"
        )));
    }
    if deltas.is_empty() || deltas.iter().any(|d| !(0.0..=1.0).contains(d)) {
        return Err(Error::invalid("delta grid must be non-empty and inside [0, 1]"));
    }
    let amp = upper_triangle(matrix.amplitude_matrix(), n);
    let phase = upper_triangle(matrix.phase_matrix(), n);
    let mut warnings = Vec::new();
    let rows: Vec<(f64, f64)> = deltas
        .iter()
        .map(|&delta| {
            let mixed = matrix.remix(delta).expect("delta validated");
            let coph = upper_triangle(&cophenetic(&complete_linkage(mixed.combined_matrix(), n), n), n);
            (pearson(&coph, &amp), pearson(&coph, &phase))
        })
        .zip(deltas)
        .map(|((a, p), delta)| {
            if a.is_none() || p.is_none() {
                let msg = format!("delta {delta}: correlation undefined (constant input), using 0");
                log::warn!("{msg}");
                warnings.push(msg);
            }
            (a.unwrap_or(0.0), p.unwrap_or(0.0))
        })
        .collect();
    let abs_diff: Vec<f64> = rows.iter().map(|(a, p)| (a - p).abs()).collect();
    let separating: Vec<bool> = deltas
        .iter()
        .map(|&delta| {
            amp.iter()
                .zip(&phase)
                .all(|(a, p)| delta * a + (1.0 - delta) * p > 0.0 || (*a == 0.0 && *p == 0.0))
        })
        .collect();
    let any_separating = separating.iter().any(|s| *s);
    if !any_separating {
        let msg = "no delta separates all distinct curves; choosing over the whole grid".to_string();
        log::warn!("{msg}");
        warnings.push(msg);
    }
    let mut best: Option<usize> = None;
    for (i, d) in abs_diff.iter().enumerate() {
        if any_separating && !separating[i] {
            continue;
        }
        let better = match best {
            None => true,
            Some(b) => *d < abs_diff[b] || (*d == abs_diff[b] && deltas[i] > deltas[b]),
        };
        if better {
            best = Some(i);
        }
    }
    let best = best.expect("grid is non-empty");
    let max = abs_diff.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = abs_diff.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DeltaSweepResult {
        deltas: deltas.to_vec(),
        coph_corr_amp: rows.iter().map(|r| r.0).collect(),
        coph_corr_phase: rows.iter().map(|r| r.1).collect(),
        abs_diff,
        separating,
        chosen_delta: deltas[best],
        flat_flag: max - min < FLAT_SWEEP,
        warnings,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterAssignment {
    /// Cluster of each curve, in `1..=g`.
    pub labels: Vec<usize>,
    pub g: usize,
    pub sizes: Vec<usize>,
    #[serde(default)]
    pub ids: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl ClusterAssignment {
    /// Curve indices of cluster `label` (1-based), ascending.
    pub fn members(&self, label: usize) -> Vec<usize> {
        (0..self.labels.len()).filter(|&i| self.labels[i] == label).collect()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.labels.len() != n {
            return Err(Error::invalid(format!(
                "labels cover {} curves, dataset has {n}",
                self.labels.len()
            )));
        }
        if self.g == 0 || self.labels.iter().any(|&l| l == 0 || l > self.g) {
            return Err(Error::invalid("cluster labels must lie in 1..=G"));
        }
        Ok(())
    }
}

fn median_height(merges: &[Merge], n: usize, node: usize) -> f64 {
    let mut heights = Vec::new();
    let mut stack = vec![node];
    while let Some(c) = stack.pop() {
        if c >= n {
            let m = &merges[c - n];
            heights.push(m.height);
            stack.push(m.left);
            stack.push(m.right);
        }
    }
    quantile(&heights, 0.5)
}

fn node_size(merges: &[Merge], n: usize, node: usize) -> usize {
    if node < n {
        1
    } else {
        merges[node - n].size
    }
}

/// Complete-linkage clustering on the combined distance, cut adaptively.
///
/// Starting at the root, a node is split when it holds at least
/// `2 · min_size` curves and its merge height exceeds the median merge
/// height inside it. Children of at least `min_size` are cut recursively;
/// a smaller child is set aside and its curves later join the accepted
/// cluster with the smallest average distance to them.
pub fn cluster_curves(matrix: &DistanceMatrix, min_size: usize) -> Result<ClusterAssignment> {
    let n = matrix.len();
    if min_size == 0 {
        return Err(Error::invalid("minimum cluster size must be positive"));
    }
    let mut warnings = Vec::new();
    if n < min_size || n < 2 {
        let msg = format!("{n} curves is below the minimum cluster size {min_size}; using one cluster");
        log::warn!("{msg}");
        warnings.push(msg);
        return Ok(ClusterAssignment {
            labels: vec![1; n],
            g: 1,
            sizes: vec![n],
            ids: Vec::new(),
            warnings,
        });
    }
    let merges = complete_linkage(matrix.combined_matrix(), n);
    let members = members_of(&merges, n);
    let root = n + merges.len() - 1;

    let mut accepted: Vec<usize> = Vec::new();
    let mut set_aside: Vec<usize> = Vec::new();
    let mut stack = vec![root];
    while let Some(node) = stack.pop() {
        let size = node_size(&merges, n, node);
        if node < n || size < 2 * min_size {
            accepted.push(node);
            continue;
        }
        let m = merges[node - n];
        if m.height <= median_height(&merges, n, node) {
            accepted.push(node);
            continue;
        }
        let (l, r) = (m.left, m.right);
        let (ls, rs) = (node_size(&merges, n, l), node_size(&merges, n, r));
        match (ls >= min_size, rs >= min_size) {
            (true, true) => {
                stack.push(r);
                stack.push(l);
            }
            (true, false) => {
                set_aside.push(r);
                stack.push(l);
            }
            (false, true) => {
                set_aside.push(l);
                stack.push(r);
            }
            (false, false) => accepted.push(node),
        }
    }

    let mut clusters: Vec<Vec<usize>> = accepted.iter().map(|&c| members[c].clone()).collect();
    for c in &mut clusters {
        c.sort_unstable();
    }
    clusters.sort_by_key(|c| c[0]);
    let mut labels = vec![0usize; n];
    for (g, c) in clusters.iter().enumerate() {
        for &i in c {
            labels[i] = g + 1;
        }
    }
    let mut orphans: Vec<usize> = set_aside.iter().flat_map(|&c| members[c].iter().copied()).collect();
    orphans.sort_unstable();
    for i in orphans {
        let mut best = (f64::INFINITY, 0);
        for (g, c) in clusters.iter().enumerate() {
            let avg = c.iter().map(|&j| matrix.combined(i, j)).sum::<f64>() / c.len() as f64;
            if avg < best.0 {
                best = (avg, g + 1);
            }
        }
        labels[i] = best.1;
    }
    let g = clusters.len();
    let mut sizes = vec![0; g];
    for &l in &labels {
        sizes[l - 1] += 1;
    }
    Ok(ClusterAssignment {
        labels,
        g,
        sizes,
        ids: Vec::new(),
        warnings,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Elbow,
    Threshold,
}

impl std::str::FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elbow" => Ok(Self::Elbow),
            "threshold" => Ok(Self::Threshold),
            other => Err(Error::invalid(format!("unknown criterion `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningGrid {
    pub k_values: Vec<usize>,
    pub alpha_values: Vec<f64>,
    pub criterion: Criterion,
    /// Privacy threshold `b`; when absent under the threshold criterion, the
    /// 25th percentile of per-curve nearest-neighbor distances is used.
    pub threshold: Option<f64>,
    pub elbow_ratio: f64,
    pub seed: u64,
}

impl Default for TuningGrid {
    fn default() -> Self {
        Self {
            k_values: (1..=8).map(|i| 3 * i).collect(),
            alpha_values: (0..10).map(|i| 1.0 + 2.0 * i as f64).collect(),
            criterion: Criterion::Elbow,
            threshold: None,
            elbow_ratio: DEFAULT_ELBOW_RATIO,
            seed: 42,
        }
    }
}

impl TuningGrid {
    pub fn validate(&self) -> Result<()> {
        let ascending_k = self.k_values.windows(2).all(|w| w[0] < w[1]);
        let ascending_a = self.alpha_values.windows(2).all(|w| w[0] < w[1]);
        if self.k_values.is_empty() || self.alpha_values.is_empty() || !ascending_k || !ascending_a {
            return Err(Error::invalid("K and alpha0 grids must be non-empty and ascending"));
        }
        if let Some(b) = self.threshold {
            if !(b > 0.0) {
                return Err(Error::invalid("threshold b must be positive"));
            }
        }
        if !(self.elbow_ratio > 0.0 && self.elbow_ratio < 1.0) {
            return Err(Error::invalid("elbow ratio must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// SplitMix64 finalizer; derives independent trial seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed shared by every `α₀` trial of the `k_index`-th `K`.
pub fn trial_seed(seed: u64, k_index: usize) -> u64 {
    splitmix64(seed.wrapping_add(k_index as u64))
}

/// Elbow choice over a sequence of indicator values: from the largest
/// forward difference onward, the first position whose forward difference
/// is below `ratio` times that maximum. `None` when no position qualifies.
pub fn elbow_index(values: &[f64], ratio: f64) -> Option<usize> {
    if values.len() < 2 {
        return if values.is_empty() { None } else { Some(0) };
    }
    let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let (argmax, max) =
        diffs.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, d)| if d > acc.1 { (i, d) } else { acc },
        );
    if max <= 0.0 {
        return Some(0);
    }
    (argmax..diffs.len()).find(|&j| diffs[j] < ratio * max)
}

/// First position with value strictly above `b`.
pub fn threshold_index(values: &[f64], b: f64) -> Option<usize> {
    values.iter().position(|v| *v > b)
}

/// Per-curve distance to the nearest other curve (combined).
pub fn nearest_neighbor_distances(matrix: &DistanceMatrix) -> Vec<f64> {
    let n = matrix.len();
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| j != i)
                .map(|j| matrix.combined(i, j))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TuningReport {
    pub grid: TuningGrid,
    pub delta: f64,
    /// Threshold actually applied (threshold criterion only).
    pub threshold_used: Option<f64>,
    /// `i1[k][a]`: minimum within-cluster synthetic-to-original distance.
    pub i1: Vec<Vec<f64>>,
    pub alpha_hat: Vec<Option<f64>>,
    /// `|ρ_g|` per retained cluster, for each `K` with a chosen `α₀`.
    pub rho: Vec<Vec<f64>>,
    pub i2: Vec<Option<f64>>,
    pub chosen: Option<(usize, f64)>,
    /// Within-cluster distance evaluations performed in the first phase.
    pub phase1_evaluations: u64,
    /// `Σ_g N_g²` times the number of trials.
    pub phase1_expected: u64,
    pub warnings: Vec<String>,
}

/// Inputs shared by every tuning trial.
pub struct TuningContext<'a> {
    pub aligner: &'a Aligner,
    pub dataset: &'a CurveDataset,
    pub matrix: &'a DistanceMatrix,
    pub clusters: &'a ClusterAssignment,
    pub kernel: Kernel,
    pub karcher: KarcherSettings,
}

impl TuningContext<'_> {
    fn config(&self, k: usize, alpha0: f64, seed: u64) -> SynthesisConfig {
        SynthesisConfig {
            k,
            alpha0,
            kernel: self.kernel,
            delta: self.matrix.delta(),
            seed,
            karcher: self.karcher,
        }
    }

    fn groups(&self) -> Vec<Vec<usize>> {
        (1..=self.clusters.g).map(|g| self.clusters.members(g)).collect()
    }
}

/// Runs both phases and returns the full report.
pub fn tune(ctx: &TuningContext<'_>, grid: &TuningGrid) -> Result<TuningReport> {
    grid.validate()?;
    let n = ctx.dataset.len();
    ctx.clusters.validate(n)?;
    if ctx.matrix.len() != n {
        return Err(Error::invalid("distance matrix and dataset sizes differ"));
    }
    let delta = ctx.matrix.delta();
    let srvfs = srvfs_of(&ctx.dataset.curves);
    let groups = ctx.groups();
    let mut warnings = Vec::new();
    let mut warn = |msg: String| {
        log::warn!("{msg}");
        warnings.push(msg);
    };

    let threshold_used = match grid.criterion {
        Criterion::Elbow => None,
        Criterion::Threshold => Some(match grid.threshold {
            Some(b) => b,
            None => quantile(&nearest_neighbor_distances(ctx.matrix), 0.25),
        }),
    };

    let counter = AtomicU64::new(0);
    let mut i1 = Vec::with_capacity(grid.k_values.len());
    let mut alpha_hat = Vec::with_capacity(grid.k_values.len());
    let mut chosen_synth: Vec<Option<Vec<Srvf>>> = Vec::with_capacity(grid.k_values.len());
    for (ki, &k) in grid.k_values.iter().enumerate() {
        if k >= n {
            return Err(Error::invalid(format!("K = {k} must be below N = {n}")));
        }
        let seed = trial_seed(grid.seed, ki);
        let mut row = Vec::with_capacity(grid.alpha_values.len());
        let mut synth_row = Vec::with_capacity(grid.alpha_values.len());
        for &alpha0 in &grid.alpha_values {
            let cfg = ctx.config(k, alpha0, seed);
            let (synth, _) = synthesize_with_srvfs(ctx.aligner, ctx.dataset, &srvfs, ctx.matrix, &cfg)?;
            let synth_srvfs = srvfs_of(&synth.curves);
            let blocks = within_cluster_cross(ctx.aligner, &synth_srvfs, &srvfs, &groups, delta, &counter);
            row.push(blocks.iter().flatten().copied().fold(f64::INFINITY, f64::min));
            synth_row.push(synth_srvfs);
        }
        let pick = match grid.criterion {
            Criterion::Elbow => match elbow_index(&row, grid.elbow_ratio) {
                Some(j) => Some(j),
                None => {
                    warn(format!("K = {k}: no elbow found, using the largest alpha0"));
                    Some(row.len() - 1)
                }
            },
            Criterion::Threshold => {
                let b = threshold_used.expect("set for threshold criterion");
                let j = threshold_index(&row, b);
                if j.is_none() {
                    warn(format!("K = {k}: no alpha0 exceeds threshold {b}; unsatisfiable"));
                }
                j
            }
        };
        alpha_hat.push(pick.map(|j| grid.alpha_values[j]));
        chosen_synth.push(pick.map(|j| synth_row.swap_remove(j)));
        i1.push(row);
    }
    let sum_sq: u64 = groups.iter().map(|g| (g.len() * g.len()) as u64).sum();
    let phase1_expected = sum_sq * (grid.k_values.len() * grid.alpha_values.len()) as u64;

    let mut rho = Vec::with_capacity(grid.k_values.len());
    let mut i2 = Vec::with_capacity(grid.k_values.len());
    for (ki, synth) in chosen_synth.iter().enumerate() {
        let Some(synth) = synth else {
            rho.push(Vec::new());
            i2.push(None);
            continue;
        };
        let mut values = Vec::new();
        for (g, members) in groups.iter().enumerate() {
            if members.len() < 3 {
                warn(format!(
                    "cluster {} has {} curves; skipped in the correlation indicator",
                    g + 1,
                    members.len()
                ));
                continue;
            }
            let s: Vec<Srvf> = members.iter().map(|&i| synth[i].clone()).collect();
            let synth_pairs: Vec<f64> = pairwise_distances(ctx.aligner, &s)
                .iter()
                .map(|p| p.combined(delta))
                .collect();
            let orig_pairs = upper_triangle(ctx.matrix.subset(members).combined_matrix(), members.len());
            let r = match pearson(&orig_pairs, &synth_pairs) {
                Some(r) => r,
                None => {
                    warn(format!(
                        "K = {}: cluster {} correlation undefined, using 0",
                        grid.k_values[ki],
                        g + 1
                    ));
                    0.0
                }
            };
            values.push(r.abs());
        }
        i2.push(if values.is_empty() {
            None
        } else {
            Some(quantile(&values, 0.25))
        });
        rho.push(values);
    }

    let mut chosen: Option<(usize, f64)> = None;
    let mut best = f64::NEG_INFINITY;
    for (ki, v) in i2.iter().enumerate() {
        if let (Some(v), Some(a)) = (v, alpha_hat[ki]) {
            if *v > best {
                best = *v;
                chosen = Some((grid.k_values[ki], a));
            }
        }
    }
    if chosen.is_none() {
        warn("no (K, alpha0) pair is satisfiable".into());
    }
    Ok(TuningReport {
        grid: grid.clone(),
        delta,
        threshold_used,
        i1,
        alpha_hat,
        rho,
        i2,
        chosen,
        phase1_evaluations: counter.load(Ordering::Relaxed),
        phase1_expected,
        warnings,
    })
}

impl TuningReport {
    /// `k,alpha0,i1` rows.
    pub fn i1_csv(&self) -> String {
        let mut out = String::from("k,alpha0,i1\n");
        for (ki, row) in self.i1.iter().enumerate() {
            for (ai, v) in row.iter().enumerate() {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.grid.k_values[ki], self.grid.alpha_values[ai], v
                ));
            }
        }
        out
    }

    /// `k,alpha0_hat,i2` rows.
    pub fn i2_csv(&self) -> String {
        let mut out = String::from("k,alpha0_hat,i2\n");
        for (ki, &k) in self.grid.k_values.iter().enumerate() {
            let a = self.alpha_hat[ki].map_or(String::new(), |a| a.to_string());
            let v = self.i2[ki].map_or(String::new(), |v| v.to_string());
            out.push_str(&format!("{k},{a},{v}\n"));
        }
        out
    }
}

/// Combined distances from each synthetic curve to each original of its own
/// cluster: one row-major `N_g × N_g` block per group, synthetic rows. Every
/// evaluation increments `counter`.
pub fn within_cluster_cross(
    aligner: &Aligner,
    synth: &[Srvf],
    orig: &[Srvf],
    groups: &[Vec<usize>],
    delta: f64,
    counter: &AtomicU64,
) -> Vec<Vec<f64>> {
    groups
        .par_iter()
        .map(|members| {
            let s: Vec<Srvf> = members.iter().map(|&i| synth[i].clone()).collect();
            let o: Vec<Srvf> = members.iter().map(|&i| orig[i].clone()).collect();
            let d = cross_distances(aligner, &s, &o);
            counter.fetch_add(d.len() as u64, Ordering::Relaxed);
            d.iter().map(|p| p.combined(delta)).collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::PairDistance;

    fn matrix(n: usize, f: impl Fn(usize, usize) -> (f64, f64)) -> DistanceMatrix {
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let (a, p) = f(i, j);
                pairs.push(PairDistance { amplitude: a, phase: p });
            }
        }
        DistanceMatrix::from_upper(n, 1.0, &pairs).unwrap()
    }

    #[test]
    fn cophenetic_of_small_tree() {
        // 0 and 1 close, 2 far.
        let d = [0.0, 1.0, 5.0, 1.0, 0.0, 4.0, 5.0, 4.0, 0.0];
        let merges = complete_linkage(&d, 3);
        assert_eq!(merges.len(), 2);
        let c = cophenetic(&merges, 3);
        assert_eq!(c[1], 1.0);
        assert_eq!(c[2], 5.0);
        assert_eq!(c[5], 5.0);
    }

    #[test]
    fn identical_sources_give_flat_sweep() {
        let m = matrix(6, |i, j| {
            let d = ((i * 7 + j * 3) % 5) as f64 + 1.0;
            (d, d)
        });
        let r = tune_delta(&m, &[0.0, 0.5, 1.0]).unwrap();
        assert!(r.abs_diff.iter().all(|d| *d == 0.0));
        assert!(r.flat_flag);
        assert_eq!(r.chosen_delta, 1.0);
        assert_eq!(tune_delta(&m, &[0.3]).unwrap().chosen_delta, 0.3);
        assert!(tune_delta(&matrix(2, |_, _| (1.0, 1.0)), &[0.5]).is_err());
    }

    #[test]
    fn phase_only_endpoint_is_skipped_when_it_merges_curves() {
        // Pair (0, 1) differs in amplitude only.
        let m = matrix(6, |i, j| {
            let a = ((i * 7 + j * 3) % 5) as f64 + 1.0;
            let p = if (i, j) == (0, 1) { 0.0 } else { 0.5 * a };
            (a, p)
        });
        let r = tune_delta(&m, &[0.0, 0.5, 1.0]).unwrap();
        assert_eq!(r.separating, vec![false, true, true]);
        assert_ne!(r.chosen_delta, 0.0);
        // A lone degenerate value is still chosen, with a warning.
        let lone = tune_delta(&m, &[0.0]).unwrap();
        assert_eq!(lone.chosen_delta, 0.0);
        assert_eq!(lone.warnings.len(), 1);
    }

    #[test]
    fn equal_distances_give_one_cluster() {
        let m = matrix(50, |_, _| (1.0, 1.0));
        let c = cluster_curves(&m, 20).unwrap();
        assert_eq!(c.g, 1);
        assert_eq!(c.sizes, vec![50]);
    }

    #[test]
    fn small_dataset_is_one_cluster_with_warning() {
        let m = matrix(5, |i, j| ((i + j) as f64, 0.0));
        let c = cluster_curves(&m, 20).unwrap();
        assert_eq!(c.g, 1);
        assert_eq!(c.warnings.len(), 1);
    }

    #[test]
    fn elbow_and_threshold_rules() {
        // Differences 0.1, 0.5, 0.3, 0.05, 0.01: max 0.5 at 1; first below
        // 0.125 from there is index 3.
        let v = [0.0, 0.1, 0.6, 0.9, 0.95, 0.96];
        assert_eq!(elbow_index(&v, 0.25), Some(3));
        assert_eq!(elbow_index(&[1.0, 0.5, 0.2], 0.25), Some(0));
        assert_eq!(elbow_index(&[0.0, 1.0, 2.0, 3.0], 0.25), None);
        assert_eq!(elbow_index(&[0.4], 0.25), Some(0));
        assert_eq!(threshold_index(&v, 0.5), Some(2));
        assert_eq!(threshold_index(&v, 2.0), None);
    }
}
