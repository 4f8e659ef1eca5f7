//! Interpolating cubic splines used to turn irregular trajectory records into
//! sampled functions.
//!
//! Spatial components use a natural cubic spline (zero second derivative at
//! both ends). The elapsed-time component uses a Fritsch–Carlson monotone
//! cubic Hermite interpolant so that the sampled function never decreases.

use crate::error::{Error, Result};

fn check_knots(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "knot abscissae ({}) and values ({}) differ in length",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::invalid("a spline needs at least two knots"));
    }
    if let Some(bad) = xs.iter().chain(ys).find(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite knot coordinate {bad}")));
    }
    for i in 1..xs.len() {
        if xs[i] == xs[i - 1] {
            return Err(Error::DuplicateKnot { index: i });
        }
        if xs[i] < xs[i - 1] {
            return Err(Error::invalid(format!("knot abscissae must increase (index {i})")));
        }
    }
    Ok(())
}

/// Index `k` of the knot interval `[xs[k], xs[k+1]]` containing `x`, clamped
/// to the first/last interval for points outside the knot range.
fn interval(xs: &[f64], x: f64) -> usize {
    let last = xs.len() - 2;
    match xs.binary_search_by(|probe| probe.total_cmp(&x)) {
        Ok(i) => i.min(last),
        Err(0) => 0,
        Err(i) => (i - 1).min(last),
    }
}

/// Natural cubic spline through `(xs[j], ys[j])`.
#[derive(Clone, Debug)]
pub struct NaturalCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// Second derivatives at the knots.
    second: Vec<f64>,
}

impl NaturalCubicSpline {
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        check_knots(xs, ys)?;
        let n = xs.len();
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior equations
            //   h[i-1] M[i-1] + 2 (h[i-1] + h[i]) M[i] + h[i] M[i+1] = 6 (s[i] - s[i-1])
            // with M[0] = M[n-1] = 0.
            let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
            let slope: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
            let interior = n - 2;
            let mut diag = vec![0.0; interior];
            let mut rhs = vec![0.0; interior];
            for k in 0..interior {
                let i = k + 1;
                diag[k] = 2.0 * (h[i - 1] + h[i]);
                rhs[k] = 6.0 * (slope[i] - slope[i - 1]);
            }
            for k in 1..interior {
                let w = h[k] / diag[k - 1];
                diag[k] -= w * h[k];
                rhs[k] -= w * rhs[k - 1];
            }
            second[interior] = rhs[interior - 1] / diag[interior - 1];
            for k in (0..interior - 1).rev() {
                second[k + 1] = (rhs[k] - h[k + 1] * second[k + 2]) / diag[k];
            }
        }
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            second,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = interval(&self.xs, x);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let a = (x1 - x) / h;
        let b = (x - x0) / h;
        a * self.ys[k]
            + b * self.ys[k + 1]
            + ((a * a * a - a) * self.second[k] + (b * b * b - b) * self.second[k + 1]) * h * h / 6.0
    }
}

/// Monotone cubic Hermite interpolant with Fritsch–Carlson tangent limiting.
#[derive(Clone, Debug)]
pub struct MonotoneCubicSpline {
    xs: Vec<f64>,
    ys: Vec<f64>,
    tangents: Vec<f64>,
}

impl MonotoneCubicSpline {
    /// Fails with [`Error::DecreasingKnots`] at the first inversion of `ys`.
    pub fn new(xs: &[f64], ys: &[f64]) -> Result<Self> {
        check_knots(xs, ys)?;
        for i in 1..ys.len() {
            if ys[i] < ys[i - 1] {
                return Err(Error::DecreasingKnots {
                    index: i,
                    previous: ys[i - 1],
                    value: ys[i],
                });
            }
        }
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i])).collect();

        let mut tangents = vec![0.0; n];
        tangents[0] = secants[0];
        tangents[n - 1] = secants[n - 2];
        for i in 1..n - 1 {
            tangents[i] = if secants[i - 1] == 0.0 || secants[i] == 0.0 {
                0.0
            } else {
                0.5 * (secants[i - 1] + secants[i])
            };
        }
        for i in 0..n - 1 {
            if secants[i] == 0.0 {
                tangents[i] = 0.0;
                tangents[i + 1] = 0.0;
                continue;
            }
            let a = tangents[i] / secants[i];
            let b = tangents[i + 1] / secants[i];
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                tangents[i] = tau * a * secants[i];
                tangents[i + 1] = tau * b * secants[i];
            }
        }
        Ok(Self {
            xs: xs.to_vec(),
            ys: ys.to_vec(),
            tangents,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = interval(&self.xs, x);
        let (x0, x1) = (self.xs[k], self.xs[k + 1]);
        let h = x1 - x0;
        let t = ((x - x0) / h).clamp(0.0, 1.0);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * self.ys[k] + h10 * h * self.tangents[k] + h01 * self.ys[k + 1] + h11 * h * self.tangents[k + 1]
    }
}

/// Samples the natural cubic spline through the knots at `abscissae`.
pub fn smooth_spatial(xs: &[f64], ys: &[f64], abscissae: &[f64]) -> Result<Vec<f64>> {
    let spline = NaturalCubicSpline::new(xs, ys)?;
    Ok(abscissae.iter().map(|&x| spline.eval(x)).collect())
}

/// Samples the monotone interpolant through the knots at `abscissae`.
///
/// The output is passed through a running maximum so that rounding in the
/// Hermite basis can never produce a decrease between adjacent samples.
pub fn smooth_temporal(xs: &[f64], ts: &[f64], abscissae: &[f64]) -> Result<Vec<f64>> {
    let spline = MonotoneCubicSpline::new(xs, ts)?;
    let mut out: Vec<f64> = abscissae.iter().map(|&x| spline.eval(x)).collect();
    for j in 1..out.len() {
        if out[j] < out[j - 1] {
            out[j] = out[j - 1];
        }
    }
    Ok(out)
}
