//! Risk-neutral drift of the expansion density.
//!
//! The drift α solves `e^{−r_acc} ∫ e^{σω} Π^inf(ω; α) dω = 1`. Since
//! `∫ e^{σω} Π^inf = e^{σαt + σ²t/2}·(1 + Σ aₙσⁿ)`, the closed form is
//! `α = [r_acc − ½tσ² − ln(1 + Σ aₙσⁿ)]/(tσ)`. The numeric solver below does not use
//! that identity; it integrates the symbolic density term by term.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::expansion::{expansion_coefficients_with, vanilla_terms_uncached, CumulantSet, ExpansionConfig};

const BRACKET_HALF_WIDTH: f64 = 5.0;
const MAX_ITER: usize = 200;

/// Rates over the horizon. `r_acc` is an accrual (rate × time), not a rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub r_acc: f64,
    pub t_n: f64,
    pub sigma: f64,
}

impl RateSpec {
    pub fn new(r_acc: f64, t_n: f64, sigma: f64) -> Result<Self> {
        ensure_positive("t_n", t_n)?;
        ensure_positive("sigma", sigma)?;
        Ok(Self { r_acc, t_n, sigma })
    }

    /// Drift of the pure Gaussian model.
    pub fn gaussian_drift(&self) -> f64 {
        (self.r_acc - 0.5 * self.t_n * self.sigma * self.sigma) / (self.t_n * self.sigma)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSolution {
    pub alpha: f64,
    /// `e^{−r_acc} ∫ e^{σω} Π^inf dω − 1` at the returned α.
    pub residual: f64,
    pub iterations: usize,
}

/// `e^{−r_acc} ∫ e^{σω} Π^inf(ω; α) dω − 1`, integrated in closed form per term.
pub fn martingale_residual(c: &CumulantSet, rates: &RateSpec, cfg: ExpansionConfig) -> Result<f64> {
    let terms = vanilla_terms_uncached(c, cfg)?.shift_omega(rates.sigma);
    let m = terms.integrate_analytic(f64::NEG_INFINITY, f64::INFINITY, 0.0)?;
    Ok((-rates.r_acc).exp() * m - 1.0)
}

pub fn solve_drift(c: &CumulantSet, rates: &RateSpec) -> Result<DriftSolution> {
    solve_drift_with(c, rates, ExpansionConfig::default())
}

/// Bracketed Illinois regula falsi with bisection fallback on `martingale_residual`.
pub fn solve_drift_with(c: &CumulantSet, rates: &RateSpec, cfg: ExpansionConfig) -> Result<DriftSolution> {
    let base = CumulantSet {
        sigma: rates.sigma,
        t_n: rates.t_n,
        ..c.clone()
    };
    base.validate()?;
    let f = |a: f64| martingale_residual(&base.with_alpha(a), rates, cfg);
    let centre = rates.gaussian_drift();
    let (mut lo, mut hi) = (centre - BRACKET_HALF_WIDTH, centre + BRACKET_HALF_WIDTH);
    let (mut flo, mut fhi) = (f(lo)?, f(hi)?);
    if !(flo.is_finite() && fhi.is_finite()) || flo.signum() == fhi.signum() {
        return Err(Error::Solver {
            message: "martingale residual does not change sign on the drift bracket".into(),
            diagnostics: vec![
                ("alpha_lo".into(), lo),
                ("alpha_hi".into(), hi),
                ("residual_lo".into(), flo),
                ("residual_hi".into(), fhi),
            ],
        });
    }
    let mut side = 0i8;
    let mut best = if flo.abs() < fhi.abs() { (lo, flo) } else { (hi, fhi) };
    for it in 1..=MAX_ITER {
        let mut x = (lo * fhi - hi * flo) / (fhi - flo);
        if !(x > lo && x < hi) {
            x = 0.5 * (lo + hi);
        }
        let fx = f(x)?;
        if fx.abs() < best.1.abs() {
            best = (x, fx);
        }
        if fx == 0.0 || fx.abs() < 1e-15 || hi - lo < 1e-15 * (1.0 + x.abs()) {
            return Ok(DriftSolution {
                alpha: x,
                residual: fx,
                iterations: it,
            });
        }
        if fx.signum() == flo.signum() {
            lo = x;
            flo = fx;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        } else {
            hi = x;
            fhi = fx;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        }
    }
    if best.1.abs() < 1e-12 {
        return Ok(DriftSolution {
            alpha: best.0,
            residual: best.1,
            iterations: MAX_ITER,
        });
    }
    Err(Error::Solver {
        message: "drift solver did not converge".into(),
        diagnostics: vec![("alpha".into(), best.0), ("residual".into(), best.1)],
    })
}

/// Drift from the moment identity with the generated coefficients, any order.
///
/// Cheap enough for optimizer inner loops; `solve_drift_with` stays the
/// independent route.
pub fn drift_from_coefficients(c: &CumulantSet, rates: &RateSpec, cfg: ExpansionConfig) -> Result<f64> {
    c.validate()?;
    let a = expansion_coefficients_with(c, cfg.signs);
    let s = rates.sigma;
    let mut sum = 1.0;
    let mut pow = 1.0;
    for n in 1..=c.max_order() {
        pow *= s;
        sum += a.get(n) * pow;
    }
    if !(sum > 0.0) {
        return Err(Error::Solver {
            message: "moment factor 1 + Σ aₙσⁿ is not positive".into(),
            diagnostics: vec![("moment_factor".into(), sum)],
        });
    }
    Ok((rates.r_acc - 0.5 * rates.t_n * s * s - sum.ln()) / (rates.t_n * s))
}

/// Closed-form drift for expansions up to κ₁₅, written with the integer
/// coefficient table `15!/n!·(n!·aₙ)`.
pub fn drift_closed_form_k15(c: &CumulantSet, rates: &RateSpec) -> Result<f64> {
    if c.max_order() > 15 {
        return Err(Error::config("closed-form drift covers orders up to 15"));
    }
    let k = |n: usize| c.kappa(n);
    let s = rates.sigma;
    let rows: [(f64, usize, f64); 13] = [
        (217_945_728_000.0, 3, k(3)),
        (10_897_286_400.0 * 5.0, 4, k(4)),
        (10_897_286_400.0, 5, k(5)),
        (1_816_214_400.0, 6, 10.0 * k(3) * k(3) + k(6)),
        (259_459_200.0, 7, 35.0 * k(3) * k(4) + k(7)),
        (32_432_400.0, 8, 35.0 * k(4) * k(4) + 56.0 * k(3) * k(5) + k(8)),
        (3_603_600.0, 9, 126.0 * k(4) * k(5) + 84.0 * k(3) * k(6) + k(9)),
        (
            360_360.0,
            10,
            k(10) + 6.0 * (21.0 * k(5) * k(5) + 35.0 * k(4) * k(6) + 20.0 * k(3) * k(7)),
        ),
        (
            32_760.0,
            11,
            k(11) + 33.0 * (14.0 * k(5) * k(6) + 10.0 * k(4) * k(7) + 5.0 * k(3) * k(8)),
        ),
        (
            2_730.0,
            12,
            k(12) + 11.0 * (42.0 * k(6) * k(6) + 72.0 * k(5) * k(7) + 45.0 * k(4) * k(8) + 20.0 * k(3) * k(9)),
        ),
        (
            210.0,
            13,
            k(13) + 143.0 * (2.0 * k(10) * k(3) + 12.0 * k(6) * k(7) + 9.0 * k(5) * k(8) + 5.0 * k(4) * k(9)),
        ),
        (
            15.0,
            14,
            k(14)
                + 13.0
                    * (28.0 * k(11) * k(3)
                        + 11.0 * (7.0 * k(10) * k(4) + 12.0 * k(7) * k(7) + 21.0 * k(8) * k(6) + 14.0 * k(5) * k(9))),
        ),
        (
            1.0,
            15,
            k(15)
                + 13.0
                    * (35.0 * k(12) * k(3)
                        + 105.0 * k(11) * k(4)
                        + 231.0 * k(10) * k(5)
                        + 495.0 * k(7) * k(8)
                        + 385.0 * k(6) * k(9)),
        ),
    ];
    const FACT15: f64 = 1_307_674_368_000.0;
    let series: f64 = rows.iter().map(|&(m, p, v)| m * v * s.powi(p as i32)).sum::<f64>() / FACT15;
    let inner = 1.0 + series;
    if inner <= 0.0 {
        return Err(Error::domain("expansion moment 1 + Σ aₙσⁿ is not positive"));
    }
    Ok((rates.r_acc - 0.5 * rates.t_n * s * s - inner.ln()) / (rates.t_n * s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expansion::{coefficient_rational, CoefficientSigns};
    use num_rational::Ratio;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_drift_example() {
        let rates = RateSpec::new(0.05, 1.0, 0.2).unwrap();
        let c = CumulantSet::gaussian(0.2, 0.0, 1.0);
        let sol = solve_drift(&c, &rates).unwrap();
        assert!((sol.alpha - 0.15).abs() < 1e-12);
        assert!((drift_closed_form_k15(&c, &rates).unwrap() - 0.15).abs() < 1e-15);
        assert!(sol.residual.abs() < 1e-12);
    }

    /// `n!·aₙ` coefficients of the generator against the integer table rows.
    #[test]
    fn integer_rows_follow_from_the_generator() {
        let fact = |k: usize| (1..=k as i128).product::<i128>();
        let rows: &[(usize, &[((usize, usize), i128)])] = &[
            (8, &[((4, 4), 35), ((3, 5), 56), ((8, 0), 1)]),
            (9, &[((4, 5), 126), ((3, 6), 84), ((9, 0), 1)]),
            (10, &[((10, 0), 1), ((5, 5), 126), ((4, 6), 210), ((3, 7), 120)]),
            (11, &[((11, 0), 1), ((5, 6), 462), ((4, 7), 330), ((3, 8), 165)]),
            (12, &[((12, 0), 1), ((6, 6), 462), ((5, 7), 792), ((4, 8), 495), ((3, 9), 220)]),
            (13, &[((13, 0), 1), ((3, 10), 286), ((6, 7), 1716), ((5, 8), 1287), ((4, 9), 715)]),
            (
                14,
                &[((14, 0), 1), ((3, 11), 364), ((4, 10), 1001), ((7, 7), 1716), ((6, 8), 3003), ((5, 9), 2002)],
            ),
            (
                15,
                &[((15, 0), 1), ((3, 12), 455), ((4, 11), 1365), ((5, 10), 3003), ((7, 8), 6435), ((6, 9), 5005)],
            ),
        ];
        for &(n, want) in rows {
            let got = coefficient_rational(n, CoefficientSigns::GenerationRule);
            assert_eq!(got.len(), want.len(), "order {n}");
            for &(mono, v) in want {
                assert_eq!(got[&mono] * Ratio::from_integer(fact(n)), Ratio::from_integer(v), "order {n} {mono:?}");
            }
        }
        assert_eq!(fact(8) / (2 * fact(4) * fact(4)), 35);
        assert_eq!(fact(8) / (fact(3) * fact(5)), 56);
    }

    #[test]
    fn solver_agrees_with_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rates = RateSpec::new(0.03, 1.0, 0.2).unwrap();
        for _ in 0..20 {
            let ks: Vec<f64> = (3..=15).map(|_| rng.random_range(-0.05..0.05)).collect();
            let c = CumulantSet::new(0.2, 0.0, 1.0, ks).unwrap();
            let a = solve_drift(&c, &rates).unwrap();
            let b = drift_closed_form_k15(&c, &rates).unwrap();
            assert!((a.alpha - b).abs() < 1e-8);
            let g = drift_from_coefficients(&c, &rates, ExpansionConfig::default()).unwrap();
            assert!((g - b).abs() < 1e-12);
            assert!(a.residual.abs() < 1e-10);
        }
    }

    #[test]
    fn bracket_failure_is_reported() {
        // a κ₃ this large makes 1 + Σaₙσⁿ negative, so no drift can work
        let c = CumulantSet::new(1.0, 0.0, 1.0, vec![-20.0]).unwrap();
        let rates = RateSpec::new(0.0, 1.0, 1.0).unwrap();
        match solve_drift(&c, &rates) {
            Err(Error::Solver { diagnostics, .. }) => assert_eq!(diagnostics.len(), 4),
            other => panic!("expected solver failure, got {other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn drift_moves_one_for_one_with_accrual(k3 in -0.05f64..0.05, k4 in -0.05f64..0.05, r in -0.05f64..0.1) {
            let c = CumulantSet::new(0.2, 0.0, 1.0, vec![k3, k4]).unwrap();
            let h = 1e-3;
            let a0 = solve_drift(&c, &RateSpec::new(r, 1.0, 0.2).unwrap()).unwrap().alpha;
            let a1 = solve_drift(&c, &RateSpec::new(r + h, 1.0, 0.2).unwrap()).unwrap().alpha;
            prop_assert!(((a1 - a0) / h - 1.0 / 0.2).abs() < 1e-9);
        }
    }
}
