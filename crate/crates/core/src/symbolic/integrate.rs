//! Payoff and mass integrals of a [`TermSum`] over an ω-interval at fixed B.

use std::f64::consts::{PI, SQRT_2};

use super::{GaussErfTerm, TermSum};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::erfc;

/// Half-width, in standard deviations, of the window kept around each term.
const WINDOW_SIGMAS: f64 = 13.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PayoffIntegral {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

impl GaussErfTerm {
    /// ω² coefficient governing decay towards +∞ (`upward`) or −∞.
    fn tail_curvature(&self, upward: bool) -> f64 {
        match &self.erfc {
            Some(l) if (l.aw > 0.0) == upward && l.aw != 0.0 => self.expo.cww - l.aw * l.aw,
            _ => self.expo.cww,
        }
    }

    /// Centre and standard deviation of the Gaussian envelope at fixed B.
    fn envelope(&self, b: f64) -> Option<(f64, f64)> {
        let a = -self.tail_curvature(true).max(self.tail_curvature(false));
        if a <= 0.0 {
            return None;
        }
        let lin = self.expo.cw + self.expo.cwb * b;
        Some((lin / (2.0 * a), (0.5 / a).sqrt()))
    }
}

impl TermSum {
    fn check_integrable(&self, lower: f64, upper: f64) -> Result<()> {
        for (i, t) in self.terms.iter().enumerate() {
            for (infinite, upward) in [(upper == f64::INFINITY, true), (lower == f64::NEG_INFINITY, false)] {
                if infinite && t.tail_curvature(upward) >= 0.0 {
                    return Err(Error::Integrability(format!(
                        "term {i} does not decay towards {}∞",
                        if upward { "+" } else { "−" }
                    )));
                }
            }
        }
        Ok(())
    }

    /// Finite interval outside which every term is negligible.
    fn window(&self, lower: f64, upper: f64, b: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for t in &self.terms {
            if let Some((c, s)) = t.envelope(b) {
                lo = lo.min(c - WINDOW_SIGMAS * s);
                hi = hi.max(c + WINDOW_SIGMAS * s);
            }
        }
        (lower.max(lo), upper.min(hi))
    }

    /// `∫ f(ω, B) dω` by adaptive quadrature.
    pub fn integrate_mass(&self, lower: f64, upper: f64, b: f64, opts: QuadOptions) -> Result<PayoffIntegral> {
        self.check_integrable(lower, upper)?;
        let (lo, hi) = self.window(lower, upper, b);
        if !(hi > lo) {
            return Ok(PayoffIntegral {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            });
        }
        let r = integrate(|w| self.evaluate(w, b), lo, hi, opts);
        Ok(PayoffIntegral {
            value: r.value,
            abs_error: r.abs_error,
            evaluations: r.evaluations,
        })
    }

    /// `∫ (s₀e^{σω} − K)·f(ω, B) dω` over `[lower, upper]` by adaptive quadrature.
    ///
    /// `e^{σω}` is folded into each exponent before integrating.
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_payoff(
        &self,
        lower: f64,
        upper: f64,
        b: f64,
        sigma: f64,
        s0: f64,
        strike: f64,
        opts: QuadOptions,
    ) -> Result<PayoffIntegral> {
        if lower == upper {
            return Ok(PayoffIntegral {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            });
        }
        if lower > upper {
            return Err(Error::domain(format!("lower limit {lower} exceeds upper {upper}")));
        }
        let shifted = self.shift_omega(sigma);
        self.check_integrable(lower, upper)?;
        shifted.check_integrable(lower, upper)?;
        let (lo1, hi1) = self.window(lower, upper, b);
        let (lo2, hi2) = shifted.window(lower, upper, b);
        let (lo, hi) = (lo1.min(lo2), hi1.max(hi2));
        if !(hi > lo) {
            return Ok(PayoffIntegral {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            });
        }
        let r = integrate(
            |w| s0 * shifted.evaluate(w, b) - strike * self.evaluate(w, b),
            lo,
            hi,
            opts,
        );
        Ok(PayoffIntegral {
            value: r.value,
            abs_error: r.abs_error,
            evaluations: r.evaluations,
        })
    }

    /// `∫ f(ω, B) dω` in closed form; only for sums without erfc factors.
    pub fn integrate_analytic(&self, lower: f64, upper: f64, b: f64) -> Result<f64> {
        if lower == upper {
            return Ok(0.0);
        }
        if self.has_erfc() {
            return Err(Error::config("analytic integration needs erfc-free terms"));
        }
        let mut total = 0.0;
        for t in &self.terms {
            let a = -t.expo.cww;
            if a <= 0.0 {
                return Err(Error::Integrability("term with non-negative ω² coefficient".into()));
            }
            let lin = t.expo.cw + t.expo.cwb * b;
            let konst = t.expo.c0 + b * (t.expo.cb + t.expo.cbb * b);
            let m = lin / (2.0 * a);
            let s = (0.5 / a).sqrt();
            let d = taylor_shift(&t.poly.at_b(b), m);
            let g = centered_moments(d.len(), lower - m, upper - m, s);
            let sum: f64 = d.iter().zip(&g).map(|(x, y)| x * y).sum();
            let ln_pref = konst + a * m * m;
            if sum != 0.0 {
                total += sum * ln_pref.exp();
            }
        }
        Ok(total)
    }

    /// Closed-form counterpart of [`TermSum::integrate_payoff`].
    #[allow(clippy::too_many_arguments)]
    pub fn integrate_payoff_analytic(
        &self,
        lower: f64,
        upper: f64,
        b: f64,
        sigma: f64,
        s0: f64,
        strike: f64,
    ) -> Result<f64> {
        if lower > upper {
            return Err(Error::domain(format!("lower limit {lower} exceeds upper {upper}")));
        }
        let up = self.shift_omega(sigma).integrate_analytic(lower, upper, b)?;
        let down = self.integrate_analytic(lower, upper, b)?;
        Ok(s0 * up - strike * down)
    }
}

/// Coefficients of `p(m + y)` in powers of y.
fn taylor_shift(p: &[f64], m: f64) -> Vec<f64> {
    let mut d = p.to_vec();
    let n = d.len();
    for k in 0..n {
        for i in (k..n - 1).rev() {
            d[i] += m * d[i + 1];
        }
    }
    d
}

/// `G_k = ∫_{yl}^{yu} y^k e^{−y²/2s²} dy` for k < n.
fn centered_moments(n: usize, yl: f64, yu: f64, s: f64) -> Vec<f64> {
    let z = |y: f64| y / (s * SQRT_2);
    let g0 = if yl >= 0.0 {
        erfc(z(yl)) - erfc(z(yu))
    } else if yu <= 0.0 {
        erfc(-z(yu)) - erfc(-z(yl))
    } else {
        2.0 - erfc(-z(yl)) - erfc(z(yu))
    } * s
        * (0.5 * PI).sqrt();
    let gauss = |y: f64| {
        if y.is_infinite() {
            0.0
        } else {
            (-0.5 * (y / s) * (y / s)).exp()
        }
    };
    let (el, eu) = (gauss(yl), gauss(yu));
    // y^{k} e(y) with the convention that the product vanishes at ±∞
    let edge = |y: f64, e: f64, k: i32| if e == 0.0 { 0.0 } else { y.powi(k) * e };
    let s2 = s * s;
    let mut g = Vec::with_capacity(n);
    for k in 0..n {
        let v = match k {
            0 => g0,
            1 => -s2 * (eu - el),
            _ => {
                (k as f64 - 1.0) * s2 * g[k - 2]
                    - s2 * (edge(yu, eu, k as i32 - 1) - edge(yl, el, k as i32 - 1))
            }
        };
        g.push(v);
    }
    g
}
