//! Square-root velocity functions, warpings, elastic alignment and the
//! amplitude/phase distances built on it.

mod dp;
mod matrix;

use crate::error::{Error, Result};
use crate::functional::{l2_distance, Samples};

pub use dp::{Aligner, Neighborhood, DEFAULT_NEIGHBORHOOD};
pub use matrix::{
    cross_distances, distance_matrix, pairwise_distances, srvfs_of, DistanceMatrix, DISTANCE_FORMAT_VERSION,
};

/// Derivative norms below this are treated as zero velocity.
pub const ZERO_VELOCITY: f64 = 1e-12;

/// SRVF samples on the same uniform grid as the curve they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Srvf {
    pub values: Samples,
}

impl Srvf {
    pub fn new(values: Samples) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.values.dim()
    }

    pub fn norm(&self) -> f64 {
        crate::functional::l2_norm(&self.values)
    }
}

/// Finite-difference derivative of each component on the uniform grid:
/// central in the interior, one-sided at the ends.
pub fn gradient(f: &Samples) -> Samples {
    let m = f.len();
    let p = f.dim();
    let h = 1.0 / (m - 1) as f64;
    Samples::from_fn(m, p, |j, d| {
        if j == 0 {
            (f.row(1)[d] - f.row(0)[d]) / h
        } else if j == m - 1 {
            (f.row(m - 1)[d] - f.row(m - 2)[d]) / h
        } else {
            (f.row(j + 1)[d] - f.row(j - 1)[d]) / (2.0 * h)
        }
    })
}

/// `q = ḟ / √‖ḟ‖`, zero where `‖ḟ‖ < ZERO_VELOCITY`.
pub fn to_srvf(f: &Samples) -> Srvf {
    let mut q = gradient(f);
    for j in 0..q.len() {
        let row = q.row_mut(j);
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm < ZERO_VELOCITY {
            row.fill(0.0);
        } else {
            let s = norm.sqrt();
            row.iter_mut().for_each(|v| *v /= s);
        }
    }
    Srvf::new(q)
}

/// `f(x) = start + ∫₀ˣ q‖q‖` by cumulative trapezoid; `f(0) = start` exactly.
pub fn from_srvf(q: &Srvf, start: &[f64]) -> Samples {
    let m = q.len();
    let p = q.dim();
    assert_eq!(start.len(), p, "start point dimension");
    let h = 1.0 / (m - 1) as f64;
    let velocity = |j: usize| {
        let row = q.values.row(j);
        let n = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter().map(move |v| v * n)
    };
    let mut f = Samples::zeros(m, p);
    f.row_mut(0).copy_from_slice(start);
    for j in 1..m {
        let incr: Vec<f64> = velocity(j - 1)
            .zip(velocity(j))
            .map(|(a, b)| 0.5 * h * (a + b))
            .collect();
        let (prev, cur) = f.as_mut_slice().split_at_mut(j * p);
        let prev = &prev[(j - 1) * p..];
        for d in 0..p {
            cur[d] = prev[d] + incr[d];
        }
    }
    f
}

/// A discretized boundary-fixing, strictly increasing warping of `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Warping {
    gamma: Vec<f64>,
}

impl Warping {
    pub fn identity(m: usize) -> Self {
        let last = (m - 1) as f64;
        Self {
            gamma: (0..m).map(|j| j as f64 / last).collect(),
        }
    }

    /// Validates `gamma[0] = 0`, `gamma[m-1] = 1` and strict increase.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        let m = gamma.len();
        if m < 2 {
            return Err(Error::invalid("a warping needs at least two samples"));
        }
        if gamma[0] != 0.0 || gamma[m - 1] != 1.0 {
            return Err(Error::invalid("warping must fix 0 and 1"));
        }
        if let Some(j) = (1..m).find(|&j| gamma[j].partial_cmp(&gamma[j - 1]) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::invalid(format!("warping not strictly increasing at {j}")));
        }
        Ok(Self { gamma })
    }

    pub(crate) fn from_lattice(gamma: Vec<f64>) -> Self {
        debug_assert!(Self::new(gamma.clone()).is_ok());
        Self { gamma }
    }

    /// Samples `g(x_j)` of a function on the grid, normalized to fix 0 and 1.
    pub fn from_fn(m: usize, g: impl Fn(f64) -> f64) -> Result<Self> {
        let last = (m - 1) as f64;
        let mut gamma: Vec<f64> = (0..m).map(|j| g(j as f64 / last)).collect();
        gamma[0] = 0.0;
        gamma[m - 1] = 1.0;
        Self::new(gamma)
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// `γ̇` by finite differences, central in the interior.
    pub fn derivative(&self) -> Vec<f64> {
        let g = &self.gamma;
        let m = g.len();
        let h = 1.0 / (m - 1) as f64;
        (0..m)
            .map(|j| {
                if j == 0 {
                    (g[1] - g[0]) / h
                } else if j == m - 1 {
                    (g[m - 1] - g[m - 2]) / h
                } else {
                    (g[j + 1] - g[j - 1]) / (2.0 * h)
                }
            })
            .collect()
    }

    /// `ψ = √γ̇`, the warping's point on the unit Hilbert sphere.
    pub fn psi(&self) -> Vec<f64> {
        self.derivative().into_iter().map(|d| d.max(0.0).sqrt()).collect()
    }

    pub fn max_deviation_from_identity(&self) -> f64 {
        let last = (self.gamma.len() - 1) as f64;
        self.gamma
            .iter()
            .enumerate()
            .map(|(j, g)| (g - j as f64 / last).abs())
            .fold(0.0, f64::max)
    }
}

/// `(q ∘ γ) √γ̇`, with `q ∘ γ` linearly interpolated.
pub fn warp_srvf(q: &Srvf, warping: &Warping) -> Srvf {
    let m = q.len();
    assert_eq!(warping.len(), m, "warping and SRVF grids differ");
    let p = q.dim();
    let deriv = warping.derivative();
    let mut out = Samples::zeros(m, p);
    for (j, (&g, &dg)) in warping.gamma.iter().zip(&deriv).enumerate() {
        let row = out.row_mut(j);
        crate::functional::interpolate_into(&q.values, g, row);
        let s = dg.max(0.0).sqrt();
        row.iter_mut().for_each(|v| *v *= s);
    }
    Srvf::new(out)
}

/// `arccos(∫ √γ̇)`, trapezoid rule, argument clamped to `[0, 1]`.
pub fn phase_distance_of(warping: &Warping) -> f64 {
    let psi = warping.psi();
    let m = psi.len();
    let h = 1.0 / (m - 1) as f64;
    let inner = h * (psi.iter().sum::<f64>() - 0.5 * (psi[0] + psi[m - 1]));
    inner.clamp(0.0, 1.0).acos()
}

/// Result of aligning `q2` onto `q1`.
#[derive(Clone, Debug)]
pub struct Alignment {
    pub warping: Warping,
    pub aligned: Srvf,
    /// Lattice path cost minimized by the search.
    pub cost: f64,
}

/// Amplitude and phase distance of one aligned pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairDistance {
    pub amplitude: f64,
    pub phase: f64,
}

impl PairDistance {
    pub fn combined(&self, delta: f64) -> f64 {
        delta * self.amplitude + (1.0 - delta) * self.phase
    }
}

impl Aligner {
    pub fn align(&self, q1: &Srvf, q2: &Srvf) -> Alignment {
        let (warping, cost) = self.optimal_warping(q1, q2);
        let aligned = warp_srvf(q2, &warping);
        Alignment { warping, aligned, cost }
    }

    /// Amplitude distance `‖q1 − (q2∘γ)√γ̇‖` and phase distance of `γ`.
    pub fn distance(&self, q1: &Srvf, q2: &Srvf) -> PairDistance {
        let al = self.align(q1, q2);
        PairDistance {
            amplitude: l2_distance(&q1.values, &al.aligned.values),
            phase: phase_distance_of(&al.warping),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(m: usize, f: impl Fn(f64) -> Vec<f64>) -> Samples {
        let rows: Vec<Vec<f64>> = (0..m).map(|j| f(j as f64 / (m - 1) as f64)).collect();
        Samples::from_rows(&rows).unwrap()
    }

    #[test]
    fn srvf_of_simple_curves() {
        let q = to_srvf(&curve(101, |x| vec![x]));
        assert!(q.values.as_slice().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let q = to_srvf(&curve(101, |_| vec![3.0, -1.0]));
        assert!(q.values.as_slice().iter().all(|v| *v == 0.0));

        let q = to_srvf(&curve(101, |x| vec![x, 2.0 * x, 0.0]));
        let s = 5f64.powf(0.25);
        for j in 1..100 {
            let r = q.values.row(j);
            assert!((r[0] - 1.0 / s).abs() < 1e-6);
            assert!((r[1] - 2.0 / s).abs() < 1e-6);
            assert!(r[2].abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_of_constant_srvf() {
        let one = Srvf::new(Samples::from_fn(101, 1, |_, _| 1.0));
        let f = from_srvf(&one, &[0.0]);
        for j in 0..101 {
            assert!((f.row(j)[0] - j as f64 / 100.0).abs() < 1e-12);
        }
        let zero = Srvf::new(Samples::zeros(11, 2));
        let f = from_srvf(&zero, &[1.5, -2.0]);
        assert!(f.rows().all(|r| r == [1.5, -2.0]));
    }

    #[test]
    fn warping_validation() {
        assert!(Warping::new(vec![0.0, 0.5, 0.5, 1.0]).is_err());
        assert!(Warping::new(vec![0.1, 0.5, 1.0]).is_err());
        assert!(Warping::new(vec![0.0, 0.2, 1.0]).is_ok());
    }

    #[test]
    fn identity_warp_is_noop_and_phase_zero() {
        let q = to_srvf(&curve(51, |x| vec![x.sin(), x * x]));
        let id = Warping::identity(51);
        assert!(warp_srvf(&q, &id).values.max_abs_diff(&q.values) <= 1e-9);
        assert_eq!(phase_distance_of(&id), 0.0);
    }
}
