//! Synthetic twins: each original curve is replaced by a Karcher mean of its
//! nearest neighbors under random Dirichlet weights.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elastic::{from_srvf, srvfs_of, Aligner, DistanceMatrix, Srvf};
use crate::error::{Error, Result};
use crate::functional::{Curve, CurveDataset};
use crate::karcher::{weighted_karcher_mean, KarcherConfig, WeightedSet};

/// Suffix appended to an original id to form its synthetic twin's id.
pub const SYNTHETIC_SUFFIX: &str = "-s";
/// `source_id` of every synthetic curve.
pub const SYNTHETIC_SOURCE: &str = "synthetic";
/// Time-axis clamps larger than this are logged.
pub const CLAMP_WARN: f64 = 1e-6;

/// Decreasing map from distance to unnormalized concentration.
#[derive(Clone, Copy, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Kernel {
    /// `e^(-x)`
    #[default]
    Exp,
    /// `1 / (1 + x)`
    Hyperbolic,
    /// `e^(-β₀ x)`
    ExpScaled { beta0: f64 },
}

impl Kernel {
    pub fn parse(name: &str, beta0: f64) -> Result<Self> {
        let k = match name {
            "exp" => Kernel::Exp,
            "hyp" | "hyperbolic" => Kernel::Hyperbolic,
            "exp-scaled" => Kernel::ExpScaled { beta0 },
            other => return Err(Error::invalid(format!("unknown kernel `{other}`"))),
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Kernel::ExpScaled { beta0 } if !(beta0 > 0.0 && beta0.is_finite()) => {
                Err(Error::invalid(format!("beta0 must be positive, got {beta0}")))
            }
            _ => Ok(()),
        }
    }

    /// Kernel values for `distances`. Exponential kernels are evaluated
    /// relative to the smallest distance; the common factor cancels in the
    /// normalization and keeps the largest value at 1.
    fn weights(&self, distances: &[f64]) -> Vec<f64> {
        let dmin = distances.iter().copied().fold(f64::INFINITY, f64::min);
        distances
            .iter()
            .map(|&d| match *self {
                Kernel::Exp => (-(d - dmin)).exp(),
                Kernel::Hyperbolic => 1.0 / (1.0 + d),
                Kernel::ExpScaled { beta0 } => (-beta0 * (d - dmin)).exp(),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub k: usize,
    pub alpha0: f64,
    pub kernel: Kernel,
    /// Mixing weight of the distances used for neighbor search; a matrix
    /// built with another weight is remixed.
    pub delta: f64,
    pub seed: u64,
    pub karcher: KarcherSettings,
}

/// Serializable mirror of [`KarcherConfig`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KarcherSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherSettings {
    fn default() -> Self {
        let c = KarcherConfig::default();
        Self {
            tol: c.tol,
            max_iter: c.max_iter,
        }
    }
}

impl From<KarcherSettings> for KarcherConfig {
    fn from(s: KarcherSettings) -> Self {
        KarcherConfig {
            tol: s.tol,
            max_iter: s.max_iter,
        }
    }
}

impl SynthesisConfig {
    pub fn new(k: usize, alpha0: f64, delta: f64, seed: u64) -> Self {
        Self {
            k,
            alpha0,
            kernel: Kernel::Exp,
            delta,
            seed,
            karcher: KarcherSettings::default(),
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 || self.k >= n {
            return Err(Error::invalid(format!("K = {} needs 1 <= K < N = {n}", self.k)));
        }
        if !(self.alpha0 >= 1.0 && self.alpha0.is_finite()) {
            return Err(Error::invalid(format!("alpha0 = {} must be >= 1", self.alpha0)));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::invalid(format!("delta = {} outside [0, 1]", self.delta)));
        }
        self.kernel.validate()
    }
}

/// The `k` nearest other curves to `i` by combined distance, ascending,
/// ties broken by index.
pub fn nearest_neighbors(matrix: &DistanceMatrix, i: usize, k: usize) -> Result<Vec<(usize, f64)>> {
    let n = matrix.len();
    if i >= n {
        return Err(Error::invalid(format!("curve index {i} out of range for {n} curves")));
    }
    if k >= n {
        return Err(Error::invalid(format!("K = {k} must be below N = {n}")));
    }
    let mut row: Vec<(usize, f64)> = (0..n).filter(|&j| j != i).map(|j| (j, matrix.combined(i, j))).collect();
    row.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    row.truncate(k);
    Ok(row)
}

/// Dirichlet concentrations `α₀ g(d) / Σ g(d)`.
///
/// Returns the concentrations and whether the uniform fallback
/// `α₀ / K` was used because the kernel sum vanished or overflowed.
pub fn dirichlet_parameters(distances: &[f64], alpha0: f64, kernel: Kernel) -> Result<(Vec<f64>, bool)> {
    if distances.is_empty() {
        return Err(Error::invalid("no distances to weight"));
    }
    if distances.iter().any(|d| d.is_nan() || *d < 0.0) {
        return Err(Error::invalid("distances must be non-negative"));
    }
    let g = kernel.weights(distances);
    let total: f64 = g.iter().sum();
    let k = distances.len() as f64;
    if !(total > 0.0 && total.is_finite()) {
        return Ok((vec![alpha0 / k; distances.len()], true));
    }
    let mut alphas: Vec<f64> = g.iter().map(|v| alpha0 * v / total).collect();
    let s: f64 = alphas.iter().sum();
    alphas.iter_mut().for_each(|a| *a *= alpha0 / s);
    Ok((alphas, false))
}

/// One Dirichlet draw by normalizing independent `Gamma(α_k, 1)` variates.
/// A zero concentration contributes weight zero.
pub fn sample_dirichlet<R: Rng + ?Sized>(alphas: &[f64], rng: &mut R) -> Result<Vec<f64>> {
    let mut draws = Vec::with_capacity(alphas.len());
    for &a in alphas {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::invalid(format!("invalid Dirichlet concentration {a}")));
        }
        if a == 0.0 {
            draws.push(0.0);
            continue;
        }
        let gamma = Gamma::new(a, 1.0).map_err(|e| Error::invalid(e.to_string()))?;
        draws.push(gamma.sample(rng));
    }
    let total: f64 = draws.iter().sum();
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::numerical(format!(
            "Dirichlet draw degenerated (gamma sum {total}) for concentrations {alphas:?}"
        )));
    }
    Ok(draws.into_iter().map(|g| g / total).collect())
}

/// Per-curve RNG: the seed selects the key, the curve index the stream.
pub fn curve_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeighborWeights {
    pub reference_id: String,
    pub neighbor_ids: Vec<String>,
    pub distances: Vec<f64>,
    pub alphas: Vec<f64>,
    pub weights: Vec<f64>,
    pub uniform_fallback: bool,
    pub karcher_iterations: usize,
    pub karcher_converged: bool,
    /// Largest amount the time component was raised to stay non-decreasing.
    pub time_clamp: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthesisReport {
    pub config: SynthesisConfig,
    pub entries: Vec<NeighborWeights>,
    pub mean_karcher_iterations: f64,
}

/// Raises each value to the running maximum; returns the largest raise.
fn clamp_non_decreasing(values: &mut [f64], stride: usize, component: usize) -> f64 {
    let mut worst = 0.0f64;
    let mut running = f64::NEG_INFINITY;
    for row in values.chunks_exact_mut(stride) {
        let v = &mut row[component];
        if *v < running {
            worst = worst.max(running - *v);
            *v = running;
        } else {
            running = *v;
        }
    }
    worst
}

/// Shared read-only state for synthesizing curves of one dataset.
pub struct Synthesizer<'a> {
    pub aligner: &'a Aligner,
    pub curves: &'a [Curve],
    pub srvfs: &'a [Srvf],
    pub matrix: &'a DistanceMatrix,
    pub config: &'a SynthesisConfig,
}

impl Synthesizer<'_> {
    /// Synthetic twin of curve `i` drawn with `rng`.
    pub fn synthesize_one<R: Rng + ?Sized>(&self, i: usize, rng: &mut R) -> Result<(Curve, NeighborWeights)> {
        let cfg = self.config;
        let neighbors = nearest_neighbors(self.matrix, i, cfg.k)?;
        let distances: Vec<f64> = neighbors.iter().map(|n| n.1).collect();
        let (alphas, uniform_fallback) = dirichlet_parameters(&distances, cfg.alpha0, cfg.kernel)?;
        let weights = sample_dirichlet(&alphas, rng)?;
        self.combine(i, &neighbors, alphas, weights, uniform_fallback)
    }

    /// Karcher mean of the given neighbors under fixed weights, started at
    /// the weighted mean of their starting points.
    pub fn combine(
        &self,
        i: usize,
        neighbors: &[(usize, f64)],
        alphas: Vec<f64>,
        weights: Vec<f64>,
        uniform_fallback: bool,
    ) -> Result<(Curve, NeighborWeights)> {
        let original = &self.curves[i];
        let p = original.values.dim();
        let mut start = vec![0.0; p];
        for (&(j, _), w) in neighbors.iter().zip(&weights) {
            for (s, v) in start.iter_mut().zip(self.curves[j].start()) {
                *s += w * v;
            }
        }
        let set = WeightedSet::new(
            neighbors.iter().map(|&(j, _)| &self.srvfs[j]).collect(),
            weights.clone(),
        )?;
        let km = weighted_karcher_mean(self.aligner, &set, &self.config.karcher.into())?;
        let mut values = from_srvf(&km.mean, &start);
        let time_clamp = if p >= 3 {
            clamp_non_decreasing(values.as_mut_slice(), p, 2)
        } else {
            0.0
        };
        if time_clamp > CLAMP_WARN {
            log::warn!(
                "synthetic curve for `{}`: time component clamped by {time_clamp:.3e}",
                original.id
            );
        }
        if !values.is_finite() {
            return Err(Error::numerical(format!(
                "synthetic curve for `{}` is not finite",
                original.id
            )));
        }
        let curve = Curve::new(format!("{}{SYNTHETIC_SUFFIX}", original.id), SYNTHETIC_SOURCE, values);
        let entry = NeighborWeights {
            reference_id: original.id.clone(),
            neighbor_ids: neighbors.iter().map(|&(j, _)| self.curves[j].id.clone()).collect(),
            distances: neighbors.iter().map(|n| n.1).collect(),
            alphas,
            weights,
            uniform_fallback,
            karcher_iterations: km.iterations,
            karcher_converged: km.converged,
            time_clamp,
        };
        Ok((curve, entry))
    }
}

/// One synthetic twin per curve of `dataset`.
pub fn synthesize_all(
    aligner: &Aligner,
    dataset: &CurveDataset,
    matrix: &DistanceMatrix,
    config: &SynthesisConfig,
) -> Result<(CurveDataset, SynthesisReport)> {
    let srvfs = srvfs_of(&dataset.curves);
    synthesize_with_srvfs(aligner, dataset, &srvfs, matrix, config)
}

/// [`synthesize_all`] with precomputed SRVFs of `dataset.curves`.
pub fn synthesize_with_srvfs(
    aligner: &Aligner,
    dataset: &CurveDataset,
    srvfs: &[Srvf],
    matrix: &DistanceMatrix,
    config: &SynthesisConfig,
) -> Result<(CurveDataset, SynthesisReport)> {
    let n = dataset.len();
    if matrix.len() != n {
        return Err(Error::invalid(format!(
            "distance matrix covers {} curves, dataset has {n}",
            matrix.len()
        )));
    }
    config.validate(n)?;
    let remixed;
    let matrix = if matrix.delta() == config.delta {
        matrix
    } else {
        remixed = matrix.remix(config.delta)?;
        &remixed
    };
    let synth = Synthesizer {
        aligner,
        curves: &dataset.curves,
        srvfs,
        matrix,
        config,
    };
    let results = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = curve_rng(config.seed, i);
            synth.synthesize_one(i, &mut rng).map_err(|e| Error::Curve {
                id: dataset.curves[i].id.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (curves, entries): (Vec<Curve>, Vec<NeighborWeights>) = results.into_iter().unzip();
    let mut out = dataset.with_curves(curves)?;
    out.metadata.insert("source".into(), SYNTHETIC_SOURCE.into());
    out.metadata.insert("k".into(), config.k.to_string());
    out.metadata.insert("alpha0".into(), config.alpha0.to_string());
    out.metadata.insert("delta".into(), config.delta.to_string());
    out.metadata.insert("seed".into(), config.seed.to_string());
    let mean_karcher_iterations = entries.iter().map(|e| e.karcher_iterations as f64).sum::<f64>() / n as f64;
    let report = SynthesisReport {
        config: config.clone(),
        entries,
        mean_karcher_iterations,
    };
    Ok((out, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::PairDistance;

    fn matrix_from_row(row: &[f64]) -> DistanceMatrix {
        // Only row 0 matters; fill the rest with a constant.
        let n = row.len();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d = if i == 0 { row[j] } else { 9.0 };
                pairs.push(PairDistance { amplitude: d, phase: d });
            }
        }
        DistanceMatrix::from_upper(n, 1.0, &pairs).unwrap()
    }

    #[test]
    fn neighbors_sorted_with_index_ties() {
        let d = matrix_from_row(&[0.0, 3.0, 1.0, 2.0]);
        assert_eq!(nearest_neighbors(&d, 0, 2).unwrap(), vec![(2, 1.0), (3, 2.0)]);
        let d = matrix_from_row(&[0.0, 1.0, 1.0, 1.0]);
        let ids: Vec<usize> = nearest_neighbors(&d, 0, 2).unwrap().iter().map(|n| n.0).collect();
        assert_eq!(ids, [1, 2]);
        assert_eq!(nearest_neighbors(&d, 0, 3).unwrap().len(), 3);
        assert!(nearest_neighbors(&d, 0, 4).is_err());
    }

    #[test]
    fn concentrations() {
        let (a, fb) = dirichlet_parameters(&[0.4, 0.4, 0.4], 6.0, Kernel::Exp).unwrap();
        assert!(!fb);
        assert!(a.iter().all(|v| (v - 2.0).abs() < 1e-12));
        // Hand-evaluated: weights e^0 : e^{-ln 2} = 2 : 1 with alpha0 = 3.
        let (a, _) = dirichlet_parameters(&[0.0, 2f64.ln()], 3.0, Kernel::Exp).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
        let (a, _) = dirichlet_parameters(&[0.0, 1.0], 3.0, Kernel::Hyperbolic).unwrap();
        assert!((a[0] - 2.0).abs() < 1e-12 && (a[1] - 1.0).abs() < 1e-12);
        let (a, fb) = dirichlet_parameters(&[f64::INFINITY; 2], 3.0, Kernel::Hyperbolic).unwrap();
        assert!(fb);
        assert_eq!(a, vec![1.5, 1.5]);
    }

    #[test]
    fn single_component_dirichlet_is_one() {
        let mut rng = curve_rng(1, 0);
        assert_eq!(sample_dirichlet(&[5.0], &mut rng).unwrap(), vec![1.0]);
        let w = sample_dirichlet(&[2.0, 0.0, 1.0], &mut rng).unwrap();
        assert_eq!(w[1], 0.0);
    }

    #[test]
    fn substreams_differ_and_repeat() {
        let a: u64 = curve_rng(42, 0).random();
        let b: u64 = curve_rng(42, 1).random();
        let a2: u64 = curve_rng(42, 0).random();
        assert_ne!(a, b);
        assert_eq!(a, a2);
    }

    #[test]
    fn clamp_reports_largest_raise() {
        let mut v = vec![0.0, 0.0, 1.0, 0.5, 0.9, 2.0];
        // stride 1, component 0
        let worst = clamp_non_decreasing(&mut v, 1, 0);
        assert_eq!(worst, 0.5);
        assert_eq!(v, vec![0.0, 0.0, 1.0, 1.0, 1.0, 2.0]);
    }
}
