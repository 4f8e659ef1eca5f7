//! Dynamic-programming search for the warping that best aligns one SRVF onto
//! another.
//!
//! The search runs on the `m × m` lattice of grid indices. A path goes from
//! `(0, 0)` to `(m-1, m-1)` through steps `(k, l)`: `k` cells along the
//! domain, `l` cells along the warping's range. Along a step the warping is
//! linear with slope `l / k`. The cost of a path is the left-rectangle sum
//!
//! `Σ_{i=0}^{m-2} h · |q1[i] − q2(γ[i]) · √((γ[i+1] − γ[i]) / h)|²`
//!
//! with `q2(γ)` linearly interpolated.

use super::{Srvf, Warping};
use crate::error::{Error, Result};

/// Admissible lattice steps `(k, l)`, both components ≥ 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Neighborhood {
    steps: Vec<(usize, usize)>,
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl Neighborhood {
    /// All coprime steps with components up to `max`, ordered by `k` then `l`.
    /// Non-coprime steps are compositions of a coprime one and add nothing.
    pub fn coprime(max: usize) -> Result<Self> {
        if max == 0 || max > 30 {
            return Err(Error::invalid(format!("neighborhood size {max} outside 1..=30")));
        }
        let mut steps = vec![(1, 1)];
        for k in 1..=max {
            for l in 1..=max {
                if (k, l) != (1, 1) && gcd(k, l) == 1 {
                    steps.push((k, l));
                }
            }
        }
        Ok(Self { steps })
    }

    /// Slopes {1, 1/2, 2, 1/3, 3}.
    pub fn five_slopes() -> Self {
        Self {
            steps: vec![(1, 1), (2, 1), (1, 2), (3, 1), (1, 3)],
        }
    }

    pub fn from_steps(steps: Vec<(usize, usize)>) -> Result<Self> {
        if steps.is_empty() || steps.iter().any(|&(k, l)| k == 0 || l == 0) {
            return Err(Error::invalid(
                "lattice steps must be non-empty with positive components",
            ));
        }
        if steps.len() > u8::MAX as usize {
            return Err(Error::invalid("at most 255 lattice steps are supported"));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> &[(usize, usize)] {
        &self.steps
    }
}

impl Default for Neighborhood {
    fn default() -> Self {
        Self::coprime(DEFAULT_NEIGHBORHOOD).expect("valid default")
    }
}

/// Largest step component of the default neighborhood.
pub const DEFAULT_NEIGHBORHOOD: usize = 6;

/// One sample inside a step: integer cell offset and interpolation fraction
/// along the range axis.
#[derive(Clone, Copy, Debug)]
struct Cell {
    offset: usize,
    frac: f64,
}

#[derive(Clone, Debug)]
struct Step {
    k: usize,
    l: usize,
    sqrt_slope: f64,
    cells: Vec<Cell>,
}

/// Reusable aligner for a fixed grid size and neighborhood.
#[derive(Clone, Debug)]
pub struct Aligner {
    m: usize,
    neighborhood: Neighborhood,
    steps: Vec<Step>,
}

impl Aligner {
    pub fn new(m: usize, neighborhood: Neighborhood) -> Result<Self> {
        if m < 2 {
            return Err(Error::invalid("alignment needs at least two grid points"));
        }
        let steps = neighborhood
            .steps
            .iter()
            .map(|&(k, l)| Step {
                k,
                l,
                sqrt_slope: (l as f64 / k as f64).sqrt(),
                cells: (0..k)
                    .map(|r| Cell {
                        offset: r * l / k,
                        frac: ((r * l) % k) as f64 / k as f64,
                    })
                    .collect(),
            })
            .collect();
        Ok(Self { m, neighborhood, steps })
    }

    pub fn grid_size(&self) -> usize {
        self.m
    }

    pub fn neighborhood(&self) -> &Neighborhood {
        &self.neighborhood
    }

    /// Relaxes every lattice cell row by row.
    fn fill(&self, tables: &[Vec<f64>], a: &[f64], p: usize, energy: &mut [f64], pred: &mut [u8]) {
        let m = self.m;
        let h = 1.0 / (m - 1) as f64;
        let mut acc = vec![0.0; m];
        for i in 1..m {
            let (done, rest) = energy.split_at_mut(i * m);
            let row = &mut rest[..m];
            let row_pred = &mut pred[i * m..(i + 1) * m];
            for (s, step) in self.steps.iter().enumerate() {
                if step.k > i || step.l >= m {
                    continue;
                }
                let i0 = i - step.k;
                let starts = m - step.l;
                let acc = &mut acc[..starts];
                acc.fill(0.0);
                let table = &tables[s];
                for r in 0..step.k {
                    let q1_row = &a[(i0 + r) * p..(i0 + r + 1) * p];
                    for (d, &target) in q1_row.iter().enumerate() {
                        let col = &table[(r * p + d) * starts..(r * p + d + 1) * starts];
                        for (e, &v) in acc.iter_mut().zip(col) {
                            let diff = target - v;
                            *e += diff * diff;
                        }
                    }
                }
                let src = &done[i0 * m..i0 * m + starts];
                let dst = &mut row[step.l..];
                let dst_pred = &mut row_pred[step.l..];
                for (((best, arg), &sq), &e0) in dst.iter_mut().zip(dst_pred.iter_mut()).zip(acc.iter()).zip(src) {
                    let total = e0 + h * sq;
                    if total < *best {
                        *best = total;
                        *arg = s as u8;
                    }
                }
            }
        }
    }

    /// Optimal lattice warping of `q2` onto `q1` and its path cost.
    pub fn optimal_warping(&self, q1: &Srvf, q2: &Srvf) -> (Warping, f64) {
        let m = self.m;
        assert!(
            q1.len() == m && q2.len() == m && q1.dim() == q2.dim(),
            "SRVFs must match the aligner grid"
        );
        let p = q1.dim();
        let a = q1.values.as_slice();
        let h = 1.0 / (m - 1) as f64;

        // For each step, the scaled interpolated q2 samples it visits, laid
        // out as [cell][component][start row] so the inner loop is contiguous.
        let tables: Vec<Vec<f64>> = self
            .steps
            .iter()
            .map(|step| {
                let starts = m - step.l;
                let mut t = vec![0.0; step.k * p * starts];
                for (r, cell) in step.cells.iter().enumerate() {
                    for d in 0..p {
                        let out = &mut t[(r * p + d) * starts..(r * p + d + 1) * starts];
                        for (j0, v) in out.iter_mut().enumerate() {
                            let lo = q2.values.row(j0 + cell.offset)[d];
                            let val = if cell.frac > 0.0 {
                                let hi = q2.values.row(j0 + cell.offset + 1)[d];
                                lo + cell.frac * (hi - lo)
                            } else {
                                lo
                            };
                            *v = val * step.sqrt_slope;
                        }
                    }
                }
                t
            })
            .collect();

        let mut energy = vec![f64::INFINITY; m * m];
        let mut pred = vec![u8::MAX; m * m];
        energy[0] = 0.0;
        self.fill(&tables, a, p, &mut energy, &mut pred);

        let mut gamma = vec![0.0; m];
        let (mut i, mut j) = (m - 1, m - 1);
        while i > 0 {
            let step = &self.steps[pred[i * m + j] as usize];
            let (i0, j0) = (i - step.k, j - step.l);
            for r in 0..step.k {
                gamma[i0 + r] = (j0 as f64 + (r * step.l) as f64 / step.k as f64) * h;
            }
            i = i0;
            j = j0;
        }
        debug_assert_eq!(j, 0);
        gamma[0] = 0.0;
        gamma[m - 1] = 1.0;
        let cost = energy[m * m - 1];
        (Warping::from_lattice(gamma), cost)
    }
}
