#![allow(dead_code)]

use std::f64::consts::PI;

use fdasynth_core::elastic::Srvf;
use fdasynth_core::functional::Samples;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random smooth curve: per component, four sine modes with random
/// amplitude in [-1, 1] and random phase, mode `k` damped by `1/k`.
#[derive(Clone, Debug)]
pub struct SmoothCurve {
    coeffs: Vec<[f64; 2]>,
    dim: usize,
}

impl SmoothCurve {
    pub fn random(rng: &mut ChaCha8Rng, dim: usize) -> Self {
        let coeffs = (0..4 * dim)
            .map(|_| [rng.random_range(-1.0..1.0), rng.random_range(0.0..2.0 * PI)])
            .collect();
        Self { coeffs, dim }
    }

    pub fn eval(&self, x: f64, d: usize) -> f64 {
        (0..4)
            .map(|k| {
                let [a, phi] = self.coeffs[d * 4 + k];
                a * ((k + 1) as f64 * PI * x + phi).sin() / (k + 1) as f64
            })
            .sum()
    }

    pub fn sample(&self, m: usize) -> Samples {
        Samples::from_fn(m, self.dim, |j, d| self.eval(j as f64 / (m - 1) as f64, d))
    }

    pub fn sample_warped(&self, m: usize, gamma: &dyn Fn(f64) -> f64) -> Samples {
        Samples::from_fn(m, self.dim, |j, d| self.eval(gamma(j as f64 / (m - 1) as f64), d))
    }
}

/// Random boundary-preserving warp, alternating between the exponential
/// family `(e^{ax} - 1)/(e^a - 1)` and `x + b sin(πx)/π`.
pub fn random_warp(rng: &mut ChaCha8Rng, index: usize) -> Box<dyn Fn(f64) -> f64> {
    if index.is_multiple_of(2) {
        let a: f64 = rng.random_range(-1.5..1.5);
        if a.abs() < 1e-6 {
            return Box::new(|x| x);
        }
        Box::new(move |x| ((a * x).exp() - 1.0) / (a.exp() - 1.0))
    } else {
        let b: f64 = rng.random_range(-0.9..0.9);
        Box::new(move |x| x + b * (PI * x).sin() / PI)
    }
}

/// Exhaustive search over every monotone lattice path built from `steps`.
/// Segment costs (left-rectangle rule, linear interpolation of `q2`) are
/// computed once per (start, step); no partial path is ever pruned.
pub fn brute_force_cost(q1: &Srvf, q2: &Srvf, steps: &[(usize, usize)]) -> f64 {
    let m = q1.len();
    let h = 1.0 / (m - 1) as f64;
    let segment = |i0: usize, j0: usize, k: usize, l: usize| -> f64 {
        let slope = (l as f64 / k as f64).sqrt();
        let mut total = 0.0;
        for r in 0..k {
            let x = j0 as f64 + r as f64 * l as f64 / k as f64;
            let lo = x.floor() as usize;
            let t = x - lo as f64;
            for d in 0..q1.dim() {
                let a = q2.values.row(lo)[d];
                let b = if t > 0.0 { q2.values.row(lo + 1)[d] } else { a };
                let diff = q1.values.row(i0 + r)[d] - (a + t * (b - a)) * slope;
                total += h * diff * diff;
            }
        }
        total
    };
    let idx = |i: usize, j: usize, s: usize| (i * m + j) * steps.len() + s;
    let mut costs = vec![f64::NAN; m * m * steps.len()];
    for i in 0..m {
        for j in 0..m {
            for (s, &(k, l)) in steps.iter().enumerate() {
                if i + k < m && j + l < m {
                    costs[idx(i, j, s)] = segment(i, j, k, l);
                }
            }
        }
    }
    struct Walk<'a> {
        m: usize,
        steps: &'a [(usize, usize)],
        costs: &'a [f64],
        best: f64,
    }
    impl Walk<'_> {
        fn go(&mut self, i: usize, j: usize, acc: f64) {
            if i == self.m - 1 && j == self.m - 1 {
                self.best = self.best.min(acc);
                return;
            }
            for (s, &(k, l)) in self.steps.iter().enumerate() {
                if i + k < self.m && j + l < self.m {
                    let c = self.costs[(i * self.m + j) * self.steps.len() + s];
                    self.go(i + k, j + l, acc + c);
                }
            }
        }
    }
    let mut walk = Walk {
        m,
        steps,
        costs: &costs,
        best: f64::INFINITY,
    };
    walk.go(0, 0, 0.0);
    walk.best
}
