//! Absorbed Gaussian density corrected for a deterministically moving barrier.
//!
//! Two schemes are offered. Sheth–Tormen keeps the whole Taylor series of the
//! barrier around maturity through `S = Σ_{p≥1} (−tₙ)^p B⁽ᵖ⁾/p! = B(0) − Bₙ`.
//! The adiabatic scheme keeps B′ and B″ only. Both reduce to the image
//! kernel when the barrier is constant.
//!
//! Every correction shares the image exponent
//! `E = exp(α(ω−ω₀) − α²t/2 − (2B−ω₀−ω)²/2t)`, so the composite density is
//! at most three terms in the symbolic algebra.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernels::{barrier_density_gm, GaussKernelParams};
use crate::special::{erfc, FRAC_1_SQRT_2PI};
use crate::symbolic::{GaussErfTerm, LinearForm, Poly, QuadExponent, TermSum};

const START_CHECK_POINTS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BarrierKind {
    Constant,
    Linear,
    Polynomial,
}

/// Barrier level at maturity plus its time derivatives there.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierPath {
    pub kind: BarrierKind,
    pub b_n: f64,
    /// `derivs[p − 1] = B⁽ᵖ⁾(tₙ)`.
    pub derivs: Vec<f64>,
}

impl BarrierPath {
    pub fn constant(b: f64) -> Self {
        Self {
            kind: BarrierKind::Constant,
            b_n: b,
            derivs: Vec::new(),
        }
    }

    /// `B(t) = b0 + ξt`, stored by its value at `t_n`.
    pub fn linear(b0: f64, xi: f64, t_n: f64) -> Self {
        Self {
            kind: BarrierKind::Linear,
            b_n: b0 + xi * t_n,
            derivs: vec![xi],
        }
    }

    pub fn polynomial(b_n: f64, derivs: Vec<f64>) -> Self {
        Self {
            kind: BarrierKind::Polynomial,
            b_n,
            derivs,
        }
    }

    pub fn deriv(&self, p: usize) -> f64 {
        if p == 0 {
            self.b_n
        } else {
            self.derivs.get(p - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn is_static(&self) -> bool {
        self.derivs.iter().all(|&d| d == 0.0)
    }

    /// Barrier level at time `t` on a horizon ending at `t_n`.
    pub fn level_at(&self, t: f64, t_n: f64) -> f64 {
        let dt = t - t_n;
        let mut fact = 1.0;
        let mut pow = 1.0;
        let mut sum = self.b_n;
        for (i, d) in self.derivs.iter().enumerate() {
            fact *= (i + 1) as f64;
            pow *= dt;
            sum += d * pow / fact;
        }
        sum
    }

    /// `Σ_{p≥1} (−tₙ)^p B⁽ᵖ⁾/p!`, or the `(−1)^p` form under `AsPrinted`.
    pub fn st_series(&self, t_n: f64, series: StSeries) -> f64 {
        let x = match series {
            StSeries::TimePowers => -t_n,
            StSeries::AsPrinted => -1.0,
        };
        let mut fact = 1.0;
        let mut pow = 1.0;
        let mut sum = 0.0;
        for (i, d) in self.derivs.iter().enumerate() {
            fact *= (i + 1) as f64;
            pow *= x;
            sum += d * pow / fact;
        }
        sum
    }

    pub fn validate(&self, omega0: f64, t_n: f64) -> Result<()> {
        ensure_positive("t_n", t_n)?;
        if !self.b_n.is_finite() || self.derivs.iter().any(|d| !d.is_finite()) {
            return Err(Error::domain("barrier path must be finite"));
        }
        match self.kind {
            BarrierKind::Constant if !self.is_static() => {
                return Err(Error::domain("constant barrier with nonzero time derivatives"));
            }
            BarrierKind::Linear if self.derivs.len() != 1 => {
                return Err(Error::domain("linear barrier needs exactly one derivative"));
            }
            _ => {}
        }
        for i in 0..=START_CHECK_POINTS {
            let t = t_n * i as f64 / START_CHECK_POINTS as f64;
            let b = self.level_at(t, t_n);
            if b <= omega0 {
                return Err(Error::domain(format!(
                    "barrier {b} at t = {t} is not above the start point {omega0}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MovingBarrierScheme {
    #[default]
    ShethTormen,
    Adiabatic,
}

/// Form of the barrier series in the first Sheth–Tormen correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum StSeries {
    /// `Σ (−tₙ)^p B⁽ᵖ⁾/p!`; dimensionally consistent, matches the squared series.
    #[default]
    TimePowers,
    /// `Σ (−1)^p B⁽ᵖ⁾/p!`, kept for comparison runs.
    AsPrinted,
}

/// Parameters shared by every moving-barrier evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MbParams {
    pub omega0: f64,
    pub alpha: f64,
    pub t: f64,
}

impl MbParams {
    pub fn new(omega0: f64, alpha: f64, t: f64) -> Self {
        Self { omega0, alpha, t }
    }

    pub fn kernel(&self, path: &BarrierPath) -> GaussKernelParams {
        GaussKernelParams::with_barrier(self.omega0, self.alpha, self.t, path.b_n)
    }

    fn image_exp(&self, b: f64, w: f64) -> f64 {
        let d = 2.0 * b - self.omega0 - w;
        (self.alpha * (w - self.omega0) - 0.5 * self.alpha * self.alpha * self.t - d * d / (2.0 * self.t)).exp()
    }
}

pub fn pi1_st(p: &MbParams, path: &BarrierPath, omega_n: f64) -> Result<f64> {
    pi1_st_with(p, path, omega_n, StSeries::TimePowers)
}

pub fn pi1_st_with(p: &MbParams, path: &BarrierPath, omega_n: f64, series: StSeries) -> Result<f64> {
    ensure_positive("t", p.t)?;
    let b = path.b_n;
    if omega_n >= b {
        return Ok(0.0);
    }
    let s = path.st_series(p.t, series);
    Ok(2.0 * FRAC_1_SQRT_2PI * (b - omega_n) / p.t.powf(1.5) * p.image_exp(b, omega_n) * s)
}

pub fn pi2_st(p: &MbParams, path: &BarrierPath, omega_n: f64) -> Result<f64> {
    ensure_positive("t", p.t)?;
    let b = path.b_n;
    if omega_n >= b {
        return Ok(0.0);
    }
    let s = path.st_series(p.t, StSeries::TimePowers);
    let d = b - omega_n;
    Ok(-2.0 * FRAC_1_SQRT_2PI * d * d / p.t.powf(2.5) * p.image_exp(b, omega_n) * s * s)
}

/// `(Π⁽ᵃ⁾, Π⁽ᵇ⁾, Π⁽ᶜ⁾)`; only B′ and B″ enter.
pub fn pi_adiabatic_terms(p: &MbParams, path: &BarrierPath, omega_n: f64) -> Result<(f64, f64, f64)> {
    ensure_positive("t", p.t)?;
    let b = path.b_n;
    if omega_n >= b {
        return Ok((0.0, 0.0, 0.0));
    }
    let (b1, b2) = (path.deriv(1), path.deriv(2));
    let d = b - omega_n;
    let e = p.image_exp(b, omega_n);
    let k = (2.0 / PI).sqrt() / p.t.sqrt();
    let pa = -k * b1 * d * e;
    let pc = -k * d * d * b1 * b1 * e;
    let drift = (p.alpha * (omega_n - p.omega0) - 0.5 * p.alpha * p.alpha * p.t).exp();
    let arg = (2.0 * b - p.omega0 - omega_n) / (2.0 * p.t).sqrt();
    let pb = b2 * p.t.sqrt() * FRAC_1_SQRT_2PI * d * e - 0.5 * b2 * d * (b - p.omega0) * drift * erfc(arg);
    Ok((pa, pb, pc))
}

/// Composite moving-barrier density at `ωₙ`, evaluated in closed form.
pub fn pi_mb(p: &MbParams, path: &BarrierPath, scheme: MovingBarrierScheme, omega_n: f64) -> Result<f64> {
    pi_mb_with(p, path, scheme, StSeries::TimePowers, omega_n)
}

pub fn pi_mb_with(
    p: &MbParams,
    path: &BarrierPath,
    scheme: MovingBarrierScheme,
    series: StSeries,
    omega_n: f64,
) -> Result<f64> {
    let gm = barrier_density_gm(&p.kernel(path), omega_n)?;
    let corr = match scheme {
        MovingBarrierScheme::ShethTormen => pi1_st_with(p, path, omega_n, series)? + pi2_st(p, path, omega_n)?,
        MovingBarrierScheme::Adiabatic => {
            let (a, b, c) = pi_adiabatic_terms(p, path, omega_n)?;
            a + b + c
        }
    };
    Ok(gm + corr)
}

/// The composite density as a [`TermSum`] in `(ωₙ, Bₙ)`.
///
/// Barrier time derivatives enter as constants; only the level Bₙ is symbolic.
pub fn as_terms(p: &MbParams, path: &BarrierPath, scheme: MovingBarrierScheme, series: StSeries) -> Result<TermSum> {
    ensure_positive("t", p.t)?;
    let mut out = TermSum::gaussian_kernel(&p.kernel(path));
    let image = QuadExponent::image(p.omega0, p.alpha, p.t);
    let gap = Poly::linear(0.0, -1.0, 1.0); // B − ω
    let gap2 = gap.mul_linear(0.0, -1.0, 1.0)?;
    let t = p.t;
    match scheme {
        MovingBarrierScheme::ShethTormen => {
            let s1 = path.st_series(t, series);
            let s2 = path.st_series(t, StSeries::TimePowers);
            out.push(GaussErfTerm::new(gap.scale(2.0 * FRAC_1_SQRT_2PI * s1 / t.powf(1.5)), image, None));
            out.push(GaussErfTerm::new(
                gap2.scale(-2.0 * FRAC_1_SQRT_2PI * s2 * s2 / t.powf(2.5)),
                image,
                None,
            ));
        }
        MovingBarrierScheme::Adiabatic => {
            let (b1, b2) = (path.deriv(1), path.deriv(2));
            let k = (2.0 / PI).sqrt() / t.sqrt();
            out.push(GaussErfTerm::new(gap.scale(-k * b1), image, None));
            out.push(GaussErfTerm::new(gap2.scale(-k * b1 * b1), image, None));
            out.push(GaussErfTerm::new(gap.scale(b2 * t.sqrt() * FRAC_1_SQRT_2PI), image, None));
            if b2 != 0.0 {
                // −(B″/2)(B−ω)(B−ω₀)
                let poly = gap.mul_linear(-p.omega0, 0.0, 1.0)?.scale(-0.5 * b2);
                let r = 1.0 / (2.0 * t).sqrt();
                out.push(GaussErfTerm::new(
                    poly,
                    QuadExponent::drift(p.omega0, p.alpha, t),
                    Some(LinearForm::new(-p.omega0 * r, -r, 2.0 * r)),
                ));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> MbParams {
        MbParams::new(0.0, 0.0, 1.0)
    }

    #[test]
    fn constant_barrier_has_no_corrections() {
        let p = MbParams::new(-0.2, 0.3, 0.7);
        let path = BarrierPath::constant(0.8);
        for &w in &[-1.0, 0.0, 0.5, 0.79] {
            assert_eq!(pi1_st(&p, &path, w).unwrap(), 0.0);
            assert_eq!(pi2_st(&p, &path, w).unwrap(), 0.0);
            assert_eq!(pi_adiabatic_terms(&p, &path, w).unwrap(), (0.0, 0.0, 0.0));
            let gm = barrier_density_gm(&p.kernel(&path), w).unwrap();
            for scheme in [MovingBarrierScheme::ShethTormen, MovingBarrierScheme::Adiabatic] {
                assert_eq!(pi_mb(&p, &path, scheme, w).unwrap(), gm);
                let terms = as_terms(&p, &path, scheme, StSeries::TimePowers).unwrap();
                assert!((terms.evaluate(w, 0.8) - gm).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn linear_barrier_examples() {
        let path = BarrierPath::linear(0.9, 0.1, 1.0);
        assert!((path.b_n - 1.0).abs() < 1e-15);
        let v = pi1_st(&base(), &path, 0.0).unwrap();
        let want = -0.1 * (2.0 / PI).sqrt() * (-2.0f64).exp();
        assert!((v - want).abs() < 1e-15);
        assert!((v + 0.010_798_193).abs() < 1e-8);
    }

    #[test]
    fn adiabatic_b_term_example() {
        let path = BarrierPath::polynomial(1.0, vec![0.0, 0.2]);
        let (a, b, c) = pi_adiabatic_terms(&base(), &path, 0.0).unwrap();
        assert_eq!((a, c), (0.0, 0.0));
        let want = 0.1 / PI * ((2.0 * PI).sqrt() * (-2.0f64).exp() - PI * erfc(2f64.sqrt()));
        assert!((b - want).abs() < 1e-15);
        assert!((b - 0.006_248_166_913_001_77).abs() < 1e-15);
    }

    #[test]
    fn adiabatic_symmetry_in_slope() {
        let p = MbParams::new(0.1, -0.2, 0.5);
        let up = BarrierPath::polynomial(1.0, vec![0.3, 0.1]);
        let down = BarrierPath::polynomial(1.0, vec![-0.3, 0.1]);
        let (a1, b1, c1) = pi_adiabatic_terms(&p, &up, 0.4).unwrap();
        let (a2, b2, c2) = pi_adiabatic_terms(&p, &down, 0.4).unwrap();
        assert_eq!(a1, -a2);
        assert_eq!(b1, b2);
        assert_eq!(c1, c2);
    }

    #[test]
    fn term_form_matches_closed_forms() {
        let p = MbParams::new(0.05, 0.2, 0.8);
        let path = BarrierPath::polynomial(1.1, vec![0.2, -0.3, 0.4]);
        for scheme in [MovingBarrierScheme::ShethTormen, MovingBarrierScheme::Adiabatic] {
            let terms = as_terms(&p, &path, scheme, StSeries::TimePowers).unwrap();
            assert!(terms.len() <= 3);
            for &w in &[-1.5, -0.3, 0.4, 1.0, 1.09] {
                let direct = pi_mb(&p, &path, scheme, w).unwrap();
                assert!((terms.evaluate(w, 1.1) - direct).abs() < 1e-14, "{scheme:?} {w}");
            }
        }
    }

    #[test]
    fn as_printed_series_drops_time_powers() {
        let path = BarrierPath::polynomial(1.0, vec![0.2, 0.4]);
        assert!((path.st_series(2.0, StSeries::TimePowers) - (-0.4 + 0.8)).abs() < 1e-15);
        assert!((path.st_series(2.0, StSeries::AsPrinted) - (-0.2 + 0.2)).abs() < 1e-15);
        // S = B(0) − Bₙ for a polynomial barrier
        assert!((path.st_series(2.0, StSeries::TimePowers) - (path.level_at(0.0, 2.0) - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn path_validation() {
        assert!(BarrierPath::linear(0.5, 0.1, 1.0).validate(0.0, 1.0).is_ok());
        // starts below the spot
        assert!(BarrierPath::linear(-0.1, 1.0, 1.0).validate(0.0, 1.0).is_err());
        let bad = BarrierPath {
            kind: BarrierKind::Constant,
            b_n: 1.0,
            derivs: vec![0.1],
        };
        assert!(bad.validate(0.0, 1.0).is_err());
    }
}
