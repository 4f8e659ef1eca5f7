//! Weighted Karcher mean of SRVFs by alternating alignment and averaging.
//!
//! Each round aligns every input onto the current mean, then replaces the
//! mean with the weighted average of the aligned inputs. A new alignment is
//! only accepted if it is closer (trapezoid norm) to the mean than the
//! previous one, so the objective `Σ p_k ‖μ − aligned_k‖²` never increases.

use std::cmp::Ordering;

use rayon::prelude::*;

use crate::elastic::{warp_srvf, Aligner, Srvf, Warping};
use crate::error::{Error, Result};
use crate::functional::{l2_distance, Samples};

/// Tolerance on `|Σ weights − 1|`.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KarcherConfig {
    /// Stop when the relative objective decrease falls below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for KarcherConfig {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            max_iter: 20,
        }
    }
}

/// SRVFs with simplex weights.
#[derive(Clone, Debug)]
pub struct WeightedSet<'a> {
    srvfs: Vec<&'a Srvf>,
    weights: Vec<f64>,
}

impl<'a> WeightedSet<'a> {
    pub fn new(srvfs: Vec<&'a Srvf>, weights: Vec<f64>) -> Result<Self> {
        if srvfs.is_empty() {
            return Err(Error::invalid("Karcher mean of an empty set"));
        }
        if srvfs.len() != weights.len() {
            return Err(Error::invalid("one weight per SRVF is required"));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::invalid("weights must be finite and non-negative"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::invalid(format!("weights sum to {sum}, not 1")));
        }
        let (m, p) = (srvfs[0].len(), srvfs[0].dim());
        if srvfs.iter().any(|q| q.len() != m || q.dim() != p) {
            return Err(Error::invalid("SRVFs in a weighted set must share a grid"));
        }
        Ok(Self { srvfs, weights })
    }

    /// Equal weights `1 / K`.
    pub fn uniform(srvfs: Vec<&'a Srvf>) -> Result<Self> {
        let k = srvfs.len().max(1);
        let weights = vec![1.0 / k as f64; srvfs.len()];
        Self::new(srvfs, weights)
    }

    pub fn len(&self) -> usize {
        self.srvfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.srvfs.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct KarcherResult {
    pub mean: Srvf,
    /// Warping of each input onto the mean, in input order. Zero-weight
    /// inputs get the identity.
    pub warpings: Vec<Warping>,
    /// Objective after each alignment round.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn cmp_bits(a: &[f64], b: &[f64]) -> Ordering {
    a.iter().map(|v| v.to_bits()).cmp(b.iter().map(|v| v.to_bits()))
}

fn weighted_sum(items: &[(f64, &Samples)], m: usize, p: usize) -> Samples {
    let mut out = Samples::zeros(m, p);
    for (w, s) in items {
        for (o, v) in out.as_mut_slice().iter_mut().zip(s.as_slice()) {
            *o += w * v;
        }
    }
    out
}

/// Weighted Karcher mean.
///
/// Inputs are processed in a canonical order (by weight, then by sample
/// bits) so the result does not depend on how the set was ordered.
pub fn weighted_karcher_mean(
    aligner: &Aligner,
    set: &WeightedSet<'_>,
    config: &KarcherConfig,
) -> Result<KarcherResult> {
    if !(config.tol > 0.0) || config.max_iter == 0 {
        return Err(Error::invalid("Karcher tolerance and iteration cap must be positive"));
    }
    let m = set.srvfs[0].len();
    let p = set.srvfs[0].dim();

    let mut order: Vec<usize> = (0..set.len()).filter(|&k| set.weights[k] > 0.0).collect();
    order.sort_by(|&a, &b| {
        set.weights[a]
            .total_cmp(&set.weights[b])
            .then_with(|| cmp_bits(set.srvfs[a].values.as_slice(), set.srvfs[b].values.as_slice()))
    });
    let weights: Vec<f64> = order.iter().map(|&k| set.weights[k]).collect();
    let inputs: Vec<&Srvf> = order.iter().map(|&k| set.srvfs[k]).collect();

    let mut aligned: Vec<Srvf> = inputs.iter().map(|q| (*q).clone()).collect();
    let mut warpings: Vec<Warping> = vec![Warping::identity(m); inputs.len()];
    let mut mean = Srvf::new(weighted_sum(
        &weights
            .iter()
            .copied()
            .zip(inputs.iter().map(|q| &q.values))
            .collect::<Vec<_>>(),
        m,
        p,
    ));

    let mut trace = Vec::new();
    let mut converged = false;
    for round in 0..config.max_iter {
        let candidates: Vec<_> = inputs.par_iter().map(|q| aligner.align(&mean, q)).collect();
        let mut objective = 0.0;
        for (k, cand) in candidates.into_iter().enumerate() {
            let old = l2_distance(&mean.values, &aligned[k].values);
            let new = l2_distance(&mean.values, &cand.aligned.values);
            let best = if new < old {
                aligned[k] = cand.aligned;
                warpings[k] = cand.warping;
                new
            } else {
                old
            };
            objective += weights[k] * best * best;
        }
        trace.push(objective);
        if objective == 0.0 {
            converged = true;
            break;
        }
        if round > 0 {
            let prev = trace[round - 1];
            if prev - objective < config.tol * prev {
                converged = true;
                break;
            }
        }
        if round + 1 == config.max_iter {
            break;
        }
        mean = Srvf::new(weighted_sum(
            &weights
                .iter()
                .copied()
                .zip(aligned.iter().map(|q| &q.values))
                .collect::<Vec<_>>(),
            m,
            p,
        ));
    }

    let mut out_warpings = vec![Warping::identity(m); set.len()];
    for (slot, w) in order.iter().zip(warpings) {
        out_warpings[*slot] = w;
    }
    Ok(KarcherResult {
        mean,
        warpings: out_warpings,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
    })
}

/// Karcher mean with equal weights.
pub fn unweighted_mean(aligner: &Aligner, srvfs: &[Srvf], config: &KarcherConfig) -> Result<KarcherResult> {
    let set = WeightedSet::uniform(srvfs.iter().collect())?;
    weighted_karcher_mean(aligner, &set, config)
}

/// Applies the warpings of a Karcher result to its inputs.
pub fn aligned_inputs(srvfs: &[&Srvf], result: &KarcherResult) -> Vec<Srvf> {
    srvfs
        .iter()
        .zip(&result.warpings)
        .map(|(q, w)| warp_srvf(q, w))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elastic::{to_srvf, Neighborhood};

    fn srvf(m: usize, f: impl Fn(f64) -> [f64; 2]) -> Srvf {
        let s = Samples::from_fn(m, 2, |j, d| f(j as f64 / (m - 1) as f64)[d]);
        to_srvf(&s)
    }

    #[test]
    fn single_element_is_its_own_mean() {
        let al = Aligner::new(31, Neighborhood::default()).unwrap();
        let q = srvf(31, |x| [x.sin(), x * x]);
        let r = unweighted_mean(&al, std::slice::from_ref(&q), &KarcherConfig::default()).unwrap();
        assert_eq!(r.mean, q);
        assert_eq!(r.objective_trace, vec![0.0]);
        assert!(r.converged);
    }

    #[test]
    fn degenerate_weights_and_validation() {
        let al = Aligner::new(31, Neighborhood::default()).unwrap();
        let a = srvf(31, |x| [x.sin(), x * x]);
        let b = srvf(31, |x| [x.cos(), -x]);
        let set = WeightedSet::new(vec![&a, &b], vec![1.0, 0.0]).unwrap();
        let r = weighted_karcher_mean(&al, &set, &KarcherConfig::default()).unwrap();
        assert!(r.mean.values.max_abs_diff(&a.values) <= 1e-9);
        assert_eq!(r.warpings[1], Warping::identity(31));

        assert!(WeightedSet::new(vec![&a, &b], vec![0.7, 0.2]).is_err());
        assert!(WeightedSet::new(vec![], vec![]).is_err());
        assert!(WeightedSet::new(vec![&a, &b], vec![1.5, -0.5]).is_err());
    }
}
