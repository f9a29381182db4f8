//! Cubic interpolating splines stored by their knot second derivatives.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivative at each knot.
    m: Vec<f64>,
}

/// Thomas algorithm for `a[i]·u[i−1] + b[i]·u[i] + c[i]·u[i+1] = d[i]`.
fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c[0] / b[0];
    dp[0] = d[0] / b[0];
    for i in 1..n {
        let den = b[i] - a[i] * cp[i - 1];
        cp[i] = c[i] / den;
        dp[i] = (d[i] - a[i] * dp[i - 1]) / den;
    }
    let mut u = vec![0.0; n];
    u[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        u[i] = dp[i] - cp[i] * u[i + 1];
    }
    u
}

fn check_knots(x: &[f64], y: &[f64], min: usize) -> Result<()> {
    if x.len() != y.len() || x.len() < min {
        return Err(Error::domain(format!("spline needs ≥ {min} knots with matching values")));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("spline knots must be strictly increasing with finite values"));
    }
    Ok(())
}

impl CubicSpline {
    /// Natural end conditions: zero second derivative at both ends.
    pub fn natural(x: &[f64], y: &[f64]) -> Result<Self> {
        check_knots(x, y, 3)?;
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let k = n - 2;
        let (mut a, mut b, mut c, mut d) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for i in 1..n - 1 {
            a[i - 1] = h[i - 1];
            b[i - 1] = 2.0 * (h[i - 1] + h[i]);
            c[i - 1] = h[i];
            d[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        let inner = solve_tridiagonal(&a, &b, &c, &d);
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&inner);
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    /// Not-a-knot end conditions: third derivative continuous at the second
    /// and penultimate knots. Reproduces cubics exactly.
    pub fn not_a_knot(x: &[f64], y: &[f64]) -> Result<Self> {
        check_knots(x, y, 4)?;
        let n = x.len();
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let k = n - 2;
        let (mut a, mut b, mut c, mut d) = (vec![0.0; k], vec![0.0; k], vec![0.0; k], vec![0.0; k]);
        for i in 1..n - 1 {
            a[i - 1] = h[i - 1];
            b[i - 1] = 2.0 * (h[i - 1] + h[i]);
            c[i - 1] = h[i];
            d[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        // M₀ = (1 + h₀/h₁)M₁ − (h₀/h₁)M₂, and the mirror image at the right end
        let (r0, rn) = (h[0] / h[1], h[n - 2] / h[n - 3]);
        b[0] += h[0] * (1.0 + r0);
        c[0] -= h[0] * r0;
        b[k - 1] += h[n - 2] * (1.0 + rn);
        a[k - 1] -= h[n - 2] * rn;
        let inner = solve_tridiagonal(&a, &b, &c, &d);
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&inner);
        m[0] = (1.0 + r0) * m[1] - r0 * m[2];
        m[n - 1] = (1.0 + rn) * m[n - 2] - rn * m[n - 3];
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            m,
        })
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            i if i >= n => n - 2,
            i => i - 1,
        }
    }

    /// Value; cubic extension beyond the end knots.
    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        let h = x1 - x0;
        let (a, b) = (x1 - t, t - x0);
        self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let (x0, x1) = (self.x[i], self.x[i + 1]);
        (self.m[i] * (x1 - t) + self.m[i + 1] * (t - x0)) / (x1 - x0)
    }

    pub fn knot_second_derivatives(&self) -> &[f64] {
        &self.m
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn not_a_knot_reproduces_cubics() {
        let f = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x - 0.3 * x * x * x;
        let x = [-1.0, -0.2, 0.5, 1.1, 2.0];
        let y: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        let s = CubicSpline::not_a_knot(&x, &y).unwrap();
        for &t in &[-1.5, -0.7, 0.0, 0.8, 1.9, 2.5] {
            assert!((s.eval(t) - f(t)).abs() < 1e-12, "{t}");
        }
        assert!((s.second_derivative(0.3) - (1.0 - 1.8 * 0.3)).abs() < 1e-12);
    }

    #[test]
    fn natural_spline_interpolates_with_zero_end_curvature() {
        let x: Vec<f64> = (0..11).map(|i| i as f64 * std::f64::consts::PI / 30.0).collect();
        let y: Vec<f64> = x.iter().map(|v| (3.0 * v).sin()).collect();
        let s = CubicSpline::natural(&x, &y).unwrap();
        for (xi, yi) in x.iter().zip(&y) {
            assert!((s.eval(*xi) - yi).abs() < 1e-14);
        }
        let m = s.knot_second_derivatives();
        assert_eq!((m[0], m[10]), (0.0, 0.0));
        // sin(3x) has zero curvature at both ends of [0, π/3]
        // knot curvature error is about h²·max|f⁗|/12 ≈ 0.074
        assert!((m[5] + 9.0).abs() < 0.1, "{}", m[5]);
    }

    #[test]
    fn rejects_bad_knots() {
        assert!(CubicSpline::natural(&[0.0, 1.0], &[0.0, 1.0]).is_err());
        assert!(CubicSpline::natural(&[0.0, 1.0, 1.0], &[0.0, 1.0, 2.0]).is_err());
        assert!(CubicSpline::not_a_knot(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).is_err());
    }
}
