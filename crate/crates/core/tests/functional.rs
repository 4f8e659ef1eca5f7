mod common;

use common::rng;
use fdasynth_core::functional::{
    build_dataset, smooth_spatial, smooth_temporal, trapezoid_weights, CurveDataset, Grid, MonotoneCubicSpline,
    NaturalCubicSpline,
};
use fdasynth_core::ingest::{NormalizationParams, NormalizedTrajectory, Orientation};
use fdasynth_core::Error;
use proptest::prelude::*;
use rand::Rng;

/// Natural spline second derivatives from the full (n × n) system solved by
/// Gaussian elimination with partial pivoting.
fn dense_natural_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    a[0][0] = 1.0;
    a[n - 1][n - 1] = 1.0;
    for i in 1..n - 1 {
        let (h0, h1) = (xs[i] - xs[i - 1], xs[i + 1] - xs[i]);
        a[i][i - 1] = h0 / 6.0;
        a[i][i] = (h0 + h1) / 3.0;
        a[i][i + 1] = h1 / 6.0;
        a[i][n] = (ys[i + 1] - ys[i]) / h1 - (ys[i] - ys[i - 1]) / h0;
    }
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        for row in 0..n {
            if row != col {
                let f = a[row][col] / a[col][col];
                for c in col..=n {
                    a[row][c] -= f * a[col][c];
                }
            }
        }
    }
    (0..n).map(|i| a[i][n] / a[i][i]).collect()
}

fn dense_natural_eval(xs: &[f64], ys: &[f64], m: &[f64], x: f64) -> f64 {
    let k = (0..xs.len() - 1).find(|&k| x <= xs[k + 1]).unwrap_or(xs.len() - 2);
    let h = xs[k + 1] - xs[k];
    let (a, b) = ((xs[k + 1] - x) / h, (x - xs[k]) / h);
    a * ys[k] + b * ys[k + 1] + ((a * a * a - a) * m[k] + (b * b * b - b) * m[k + 1]) * h * h / 6.0
}

#[test]
fn natural_spline_matches_dense_solve() {
    let mut r = rng(1);
    for _ in 0..20 {
        let n = r.random_range(3..30);
        let mut xs: Vec<f64> = (0..n).map(|_| r.random_range(0.0..1.0)).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let ys: Vec<f64> = xs.iter().map(|_| r.random_range(-1.0..1.0)).collect();
        let m = dense_natural_second_derivatives(&xs, &ys);
        let spline = NaturalCubicSpline::new(&xs, &ys).unwrap();
        for j in 0..=200 {
            let x = xs[0] + (xs[xs.len() - 1] - xs[0]) * j as f64 / 200.0;
            let oracle = dense_natural_eval(&xs, &ys, &m, x);
            assert!((spline.eval(x) - oracle).abs() < 1e-9, "x={x}");
        }
    }
}

#[test]
fn natural_spline_reproduces_lines_and_knots() {
    let xs = [0.0, 0.2, 0.5, 0.9, 1.0];
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 1.0).collect();
    let s = NaturalCubicSpline::new(&xs, &ys).unwrap();
    for j in 0..=50 {
        let x = j as f64 / 50.0;
        assert!((s.eval(x) - (3.0 * x - 1.0)).abs() < 1e-12);
    }
    let zig = [0.0, 1.0, -1.0, 2.0, 0.5];
    let s = NaturalCubicSpline::new(&xs, &zig).unwrap();
    for (x, y) in xs.iter().zip(zig) {
        assert!((s.eval(*x) - y).abs() < 1e-12);
    }
}

#[test]
fn monotone_interpolant_never_decreases_on_a_dense_grid() {
    let mut r = rng(2);
    for _ in 0..20 {
        let n = r.random_range(2..40);
        let xs: Vec<f64> = (0..n).map(|j| j as f64 / (n - 1) as f64).collect();
        let mut t = 0.0;
        // Long flat stretches next to jumps stress the slope limiter.
        let ts: Vec<f64> = (0..n)
            .map(|_| {
                t += if r.random_bool(0.3) {
                    0.0
                } else {
                    r.random_range(0.0..5.0)
                };
                t
            })
            .collect();
        let abscissae: Vec<f64> = (0..10_000).map(|j| j as f64 / 9_999.0).collect();
        let raw = MonotoneCubicSpline::new(&xs, &ts).unwrap();
        let vals: Vec<f64> = abscissae.iter().map(|&x| raw.eval(x)).collect();
        assert!(vals.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        let smoothed = smooth_temporal(&xs, &ts, &abscissae).unwrap();
        assert!(smoothed.windows(2).all(|w| w[1] >= w[0]));
        assert!((smoothed[0] - ts[0]).abs() < 1e-12);
        assert!((smoothed[9_999] - ts[n - 1]).abs() < 1e-9);
    }
}

#[test]
fn spline_input_errors() {
    assert!(matches!(
        smooth_spatial(&[0.0, 0.5, 0.5, 1.0], &[0.0; 4], &[0.0]),
        Err(Error::DuplicateKnot { index: 2 })
    ));
    assert!(smooth_spatial(&[0.0], &[1.0], &[0.0]).is_err());
    assert!(smooth_spatial(&[0.0, 1.0], &[1.0, f64::NAN], &[0.0]).is_err());
}

#[test]
fn trapezoid_weights_integrate_polynomials() {
    let m = 101;
    let w = trapezoid_weights(m);
    let x = |j: usize| j as f64 / (m - 1) as f64;
    let integral = |f: &dyn Fn(f64) -> f64| (0..m).map(|j| w[j] * f(x(j))).sum::<f64>();
    assert!((integral(&|_| 1.0) - 1.0).abs() < 1e-14);
    assert!((integral(&|t| t) - 0.5).abs() < 1e-14);
    // Trapezoid error for x² is h²/6.
    assert!((integral(&|t| t * t) - (1.0 / 3.0 + 1e-4 / 6.0)).abs() < 1e-12);
}

fn params() -> NormalizationParams {
    NormalizationParams {
        min_c1: 0.0,
        max_c1: 1000.0,
        min_c2: -500.0,
        max_c2: 500.0,
        min_t: 0.0,
        max_t: 900.0,
        orientation: Orientation::MaxToZero,
    }
}

fn trajectory(id: &str, n: usize, seed: u64) -> NormalizedTrajectory {
    let mut r = rng(seed);
    let mut t = 0.0;
    NormalizedTrajectory {
        trajectory_id: id.into(),
        user_id: "u".into(),
        start_time: 0,
        points: (0..n)
            .map(|_| {
                t += r.random_range(0.01..0.1);
                [r.random_range(0.0..1.0), r.random_range(0.0..1.0), t]
            })
            .collect(),
    }
}

#[test]
fn curve_json_round_trips_within_one_ulp() {
    let trajs: Vec<_> = (0..6).map(|i| trajectory(&format!("t{i}"), 7 + i, i as u64)).collect();
    let data = build_dataset(&trajs, &params(), &Grid::uniform(101).unwrap()).unwrap();
    let back = CurveDataset::from_json(&data.to_json().unwrap()).unwrap();
    assert_eq!(back.grid, data.grid);
    assert_eq!(back.normalization, data.normalization);
    for (a, b) in data.curves.iter().zip(&back.curves) {
        assert_eq!(a.id, b.id);
        for (x, y) in a.values.as_slice().iter().zip(b.values.as_slice()) {
            assert!((x.to_bits() as i64 - y.to_bits() as i64).abs() <= 1);
        }
    }
    let bumped = data
        .to_json()
        .unwrap()
        .replace("\"format_version\":1", "\"format_version\":9");
    assert!(CurveDataset::from_json(&bumped).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn smoothed_curves_keep_time_monotone(n in 2usize..40, seed in 0u64..1000) {
        let data = build_dataset(&[trajectory("x", n, seed)], &params(), &Grid::uniform(51).unwrap()).unwrap();
        let t = data.curves[0].values.column(2);
        prop_assert!(t.windows(2).all(|w| w[1] >= w[0]));
    }
}
