//! Monotone piecewise-cubic Hermite interpolation (Fritsch-Carlson slopes).

use crate::error::{Error, Result};

/// Shape-preserving cubic interpolant through ascending knots.
///
/// Slopes are zero wherever the data changes monotonicity, so a table that decreases to a
/// single minimum and then increases interpolates to a function with the same shape.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant; knots must be strictly ascending and at least two.
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(Error::InvalidPotential(
                "table needs at least two (x, value) pairs of equal length".into(),
            ));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPotential(
                "table abscissae must be finite and strictly ascending".into(),
            ));
        }
        let n = x.len();
        let secant: Vec<f64> = (0..n - 1).map(|k| (y[k + 1] - y[k]) / (x[k + 1] - x[k])).collect();
        let mut d = vec![0.0; n];
        d[0] = secant[0];
        d[n - 1] = secant[n - 2];
        for k in 1..n - 1 {
            d[k] = if secant[k - 1] * secant[k] <= 0.0 {
                0.0
            } else {
                0.5 * (secant[k - 1] + secant[k])
            };
        }
        for k in 0..n - 1 {
            if secant[k] == 0.0 {
                d[k] = 0.0;
                d[k + 1] = 0.0;
                continue;
            }
            let a = d[k] / secant[k];
            let b = d[k + 1] / secant[k];
            let s = a * a + b * b;
            if s > 9.0 {
                let t = 3.0 / s.sqrt();
                d[k] = t * a * secant[k];
                d[k + 1] = t * b * secant[k];
            }
        }
        Ok(Self { x, y, d })
    }

    /// Knot abscissae.
    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    /// Knot values.
    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&xk| xk <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    /// Value at `t`; outside the knot range the end cubic is extrapolated.
    pub fn eval(&self, t: f64) -> f64 {
        let k = self.interval(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.y[k] + h10 * h * self.d[k] + h01 * self.y[k + 1] + h11 * h * self.d[k + 1]
    }

    /// First derivative at `t`.
    pub fn deriv(&self, t: f64) -> f64 {
        let k = self.interval(t);
        let h = self.x[k + 1] - self.x[k];
        let s = (t - self.x[k]) / h;
        let s2 = s * s;
        let dh00 = (6.0 * s2 - 6.0 * s) / h;
        let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
        let dh01 = (-6.0 * s2 + 6.0 * s) / h;
        let dh11 = 3.0 * s2 - 2.0 * s;
        dh00 * self.y[k] + dh10 * self.d[k] + dh01 * self.y[k + 1] + dh11 * self.d[k + 1]
    }
}

/// Finds `t` in `[a, b]` with `f(t) = target` for a monotone `f`, by bisection.
pub(crate) fn bisect_monotone<F: Fn(f64) -> f64>(f: F, target: f64, mut a: f64, mut b: f64) -> f64 {
    let fa = f(a) - target;
    let increasing = f(b) - target > fa;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let fm = f(m) - target;
        if (fm < 0.0) == increasing {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_knots_and_keeps_monotone_branches() {
        let x = vec![0.0, 0.2, 0.5, 0.7, 1.0];
        let y = vec![9.0, 2.0, 0.0, 1.0, 4.0];
        let s = MonotoneCubic::new(x.clone(), y.clone()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((s.eval(*a) - b).abs() < 1e-14);
        }
        let mut prev = s.eval(0.0);
        for k in 1..=500 {
            let t = 0.5 * k as f64 / 500.0;
            let v = s.eval(t);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
        for k in 1..=500 {
            let t = 0.5 + 0.5 * k as f64 / 500.0;
            let v = s.eval(t);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn cubic_data_is_reproduced_on_monotone_segment() {
        let x: Vec<f64> = (0..11).map(|k| k as f64 / 10.0).collect();
        let y: Vec<f64> = x.iter().map(|t| t * 2.0 + 1.0).collect();
        let s = MonotoneCubic::new(x, y).unwrap();
        assert!((s.eval(0.33) - 1.66).abs() < 1e-14);
        assert!((s.deriv(0.33) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bisection_inverts_monotone_map() {
        let r = bisect_monotone(|t| t * t, 0.25, 0.0, 1.0);
        assert!((r - 0.5).abs() < 1e-14);
        let r = bisect_monotone(|t| 1.0 - t, 0.25, 0.0, 1.0);
        assert!((r - 0.75).abs() < 1e-14);
    }
}
