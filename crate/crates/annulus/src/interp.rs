//! Shape-preserving piecewise-cubic interpolation.
//!
//! `Pchip` is a Fritsch–Carlson monotone cubic: on monotone data the
//! interpolant is monotone and never overshoots the data. Slopes can either be
//! derived from the data (harmonic-mean rule) or supplied by the caller — the
//! branch-inversion code supplies dr/ds = 1/u' measured on the trajectory —
//! in which case they are clamped into the monotonicity region.

use crate::error::{Error, Result};

/// Hermite cubic on [x0, x1] with values y0, y1 and slopes d0, d1.
pub fn cubic_hermite(x0: f64, x1: f64, y0: f64, y1: f64, d0: f64, d1: f64, x: f64) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * h * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * h * d1
}

/// Hermite quintic on [x0, x1] matching value, first and second derivative at
/// both ends. Used to evaluate trajectories whose curvature is known exactly
/// from the differential equation.
#[allow(clippy::too_many_arguments)]
pub fn quintic_hermite(
    x0: f64,
    x1: f64,
    y: (f64, f64),
    dy: (f64, f64),
    d2y: (f64, f64),
    x: f64,
) -> f64 {
    let h = x1 - x0;
    let t = (x - x0) / h;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    let t5 = t4 * t;
    let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
    let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
    let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
    let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
    let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
    let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
    h0 * y.0 + h * (h1 * dy.0 + h4 * dy.1) + h * h * (h2 * d2y.0 + h5 * d2y.1) + h3 * y.1
}

/// Monotone piecewise-cubic interpolant over strictly increasing knots.
#[derive(Debug, Clone)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    /// Build with Fritsch–Carlson slopes derived from the data.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        Self::check_knots(&x, &y)?;
        let d = fritsch_carlson_slopes(&x, &y);
        Ok(Pchip { x, y, d })
    }

    /// Build with caller-supplied slopes, clamped into the region that keeps
    /// each cubic piece monotone (|d| <= 3|secant|, matching sign).
    pub fn with_slopes(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Result<Self> {
        Self::check_knots(&x, &y)?;
        if d.len() != x.len() {
            return Err(Error::Data(format!(
                "slope count {} does not match knot count {}",
                d.len(),
                x.len()
            )));
        }
        let n = x.len();
        for i in 0..n {
            let left = if i > 0 {
                Some((y[i] - y[i - 1]) / (x[i] - x[i - 1]))
            } else {
                None
            };
            let right = if i + 1 < n {
                Some((y[i + 1] - y[i]) / (x[i + 1] - x[i]))
            } else {
                None
            };
            let cap = match (left, right) {
                (Some(l), Some(r)) => {
                    if l.signum() != r.signum() {
                        0.0
                    } else {
                        3.0 * l.abs().min(r.abs())
                    }
                }
                (Some(l), None) => 3.0 * l.abs(),
                (None, Some(r)) => 3.0 * r.abs(),
                (None, None) => 0.0,
            };
            let sign = right.or(left).map_or(0.0, |s| s.signum());
            if !d[i].is_finite() || d[i].signum() != sign {
                d[i] = if d[i].is_finite() && d[i] == 0.0 { 0.0 } else { sign * cap };
            }
            if d[i].abs() > cap {
                d[i] = sign * cap;
            }
        }
        Ok(Pchip { x, y, d })
    }

    fn check_knots(x: &[f64], y: &[f64]) -> Result<()> {
        if x.len() < 2 || x.len() != y.len() {
            return Err(Error::Data(format!(
                "need at least 2 matching knots, got {} x / {} y",
                x.len(),
                y.len()
            )));
        }
        for w in x.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::Data(format!(
                    "knots must be strictly increasing, found {} then {}",
                    w[0], w[1]
                )));
            }
        }
        Ok(())
    }

    /// Index of the interval containing `x` (clamped to the knot range).
    fn interval(&self, x: f64) -> usize {
        match self.x.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(self.x.len() - 2),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let i = self.interval(x);
        cubic_hermite(
            self.x[i],
            self.x[i + 1],
            self.y[i],
            self.y[i + 1],
            self.d[i],
            self.d[i + 1],
            x,
        )
    }

    pub fn knots(&self) -> (&[f64], &[f64]) {
        (&self.x, &self.y)
    }
}

fn fritsch_carlson_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        if delta[i - 1] == 0.0 || delta[i] == 0.0 || delta[i - 1].signum() != delta[i].signum() {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * h[i] + h[i - 1];
            let w2 = h[i] + 2.0 * h[i - 1];
            d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
        }
    }
    d[0] = endpoint_slope(h[0], h.get(1).copied().unwrap_or(h[0]), delta[0], delta.get(1).copied().unwrap_or(delta[0]));
    let m = n - 1;
    d[m] = endpoint_slope(
        h[m - 1],
        if m >= 2 { h[m - 2] } else { h[m - 1] },
        delta[m - 1],
        if m >= 2 { delta[m - 2] } else { delta[m - 1] },
    );
    d
}

/// Shape-preserving three-point endpoint rule.
fn endpoint_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knot_values() {
        let x = vec![0.0, 1.0, 2.5, 4.0];
        let y = vec![0.0, 1.0, 3.0, 3.5];
        let p = Pchip::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((p.eval(*xi) - yi).abs() < 1e-14);
        }
    }

    #[test]
    fn monotone_data_stays_monotone() {
        // Data with a sharp bend; a plain cubic spline would overshoot.
        let x = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.0, 0.01, 0.02, 5.0, 10.0];
        let p = Pchip::new(x, y).unwrap();
        let mut prev = p.eval(0.0);
        for k in 1..=400 {
            let v = p.eval(4.0 * k as f64 / 400.0);
            assert!(v >= prev - 1e-12, "not monotone at sample {k}");
            prev = v;
        }
        assert!(p.eval(2.5) <= 5.0 + 1e-12);
    }

    #[test]
    fn decreasing_data_supported() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![5.0, 3.0, 2.9, 0.0];
        let p = Pchip::new(x, y).unwrap();
        let mut prev = p.eval(0.0);
        for k in 1..=300 {
            let v = p.eval(3.0 * k as f64 / 300.0);
            assert!(v <= prev + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn supplied_slopes_are_clamped() {
        let x = vec![0.0, 1.0, 2.0];
        let y = vec![0.0, 1.0, 2.0];
        // Wild slopes (wrong sign, infinite) must not break monotonicity.
        let p = Pchip::with_slopes(x, y, vec![-100.0, f64::INFINITY, 50.0]).unwrap();
        let mut prev = p.eval(0.0);
        for k in 1..=200 {
            let v = p.eval(2.0 * k as f64 / 200.0);
            assert!(v >= prev - 1e-12);
            prev = v;
        }
    }

    #[test]
    fn rejects_non_increasing_knots() {
        assert!(Pchip::new(vec![0.0, 0.0, 1.0], vec![1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn cubic_hermite_exact_on_cubic() {
        let f = |x: f64| 2.0 * x * x * x - x * x + 3.0 * x - 1.0;
        let df = |x: f64| 6.0 * x * x - 2.0 * x + 3.0;
        for k in 0..=20 {
            let x = 1.0 + 0.5 * k as f64 / 20.0;
            let v = cubic_hermite(1.0, 1.5, f(1.0), f(1.5), df(1.0), df(1.5), x);
            assert!((v - f(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn quintic_hermite_exact_on_quintic() {
        let f = |x: f64| x.powi(5) - 2.0 * x.powi(4) + x.powi(2) - 7.0;
        let df = |x: f64| 5.0 * x.powi(4) - 8.0 * x.powi(3) + 2.0 * x;
        let d2f = |x: f64| 20.0 * x.powi(3) - 24.0 * x.powi(2) + 2.0;
        let (x0, x1) = (0.5, 1.25);
        for k in 0..=20 {
            let x = x0 + (x1 - x0) * k as f64 / 20.0;
            let v = quintic_hermite(x0, x1, (f(x0), f(x1)), (df(x0), df(x1)), (d2f(x0), d2f(x1)), x);
            assert!((v - f(x)).abs() < 1e-10, "x={x}: {v} vs {}", f(x));
        }
    }
}
