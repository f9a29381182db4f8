//! Closed term algebra for the expansion densities.
//!
//! Every density is a finite sum of `P(ω, B)·exp(q(ω, B))·[erfc(l(ω, B))]`
//! with `P` a bivariate polynomial, `q` a quadratic form and `l` an optional
//! linear form. The set is closed under ∂ω and ∂B:
//!
//! ```text
//! ∂ω [P e^q erfc(l)] = (∂ωP + P ∂ωq) e^q erfc(l) − (2/√π) l_ω P e^{q − l²}
//! ```
//!
//! Terms sharing exponent and erfc argument are merged after each step, so
//! the term count stays at a handful even for fifteenth-order derivatives.

mod integrate;
pub mod poly;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

pub use integrate::PayoffIntegral;
pub use poly::Poly;

use crate::error::{Error, Result};
use crate::kernels::{Barrier, GaussKernelParams};
use crate::special::{erfc, erfcx, FRAC_1_SQRT_2PI};

/// Default cap on a single differentiation request.
pub const MAX_DIFF_ORDER: usize = 15;

const DROP_THRESHOLD: f64 = 1e-300;
const EXP_UNDERFLOW: f64 = -745.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Var {
    Omega,
    Barrier,
}

/// `c0 + cw ω + cb B + cww ω² + cwb ωB + cbb B²`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct QuadExponent {
    pub c0: f64,
    pub cw: f64,
    pub cb: f64,
    pub cww: f64,
    pub cwb: f64,
    pub cbb: f64,
}

impl QuadExponent {
    /// `α(ω−ω₀) − α²t/2 − (ω−ω₀)²/2t`.
    pub fn free(omega0: f64, alpha: f64, t: f64) -> Self {
        let h = 0.5 / t;
        Self {
            c0: -alpha * omega0 - 0.5 * alpha * alpha * t - h * omega0 * omega0,
            cw: alpha + 2.0 * h * omega0,
            cb: 0.0,
            cww: -h,
            cwb: 0.0,
            cbb: 0.0,
        }
    }

    /// `α(ω−ω₀) − α²t/2 − (2B−ω−ω₀)²/2t`.
    pub fn image(omega0: f64, alpha: f64, t: f64) -> Self {
        let h = 0.5 / t;
        Self {
            c0: -alpha * omega0 - 0.5 * alpha * alpha * t - h * omega0 * omega0,
            cw: alpha - 2.0 * h * omega0,
            cb: 4.0 * h * omega0,
            cww: -h,
            cwb: 4.0 * h,
            cbb: -4.0 * h,
        }
    }

    /// `α(ω−ω₀) − α²t/2`.
    pub fn drift(omega0: f64, alpha: f64, t: f64) -> Self {
        Self {
            c0: -alpha * omega0 - 0.5 * alpha * alpha * t,
            cw: alpha,
            ..Self::default()
        }
    }

    pub fn eval(&self, w: f64, b: f64) -> f64 {
        self.c0 + w * (self.cw + self.cww * w + self.cwb * b) + b * (self.cb + self.cbb * b)
    }

    /// Partial derivative as a linear form.
    pub fn grad(&self, var: Var) -> LinearForm {
        match var {
            Var::Omega => LinearForm::new(self.cw, 2.0 * self.cww, self.cwb),
            Var::Barrier => LinearForm::new(self.cb, self.cwb, 2.0 * self.cbb),
        }
    }

    /// `q − l²`.
    pub fn minus_square(&self, l: &LinearForm) -> Self {
        Self {
            c0: self.c0 - l.a0 * l.a0,
            cw: self.cw - 2.0 * l.a0 * l.aw,
            cb: self.cb - 2.0 * l.a0 * l.ab,
            cww: self.cww - l.aw * l.aw,
            cwb: self.cwb - 2.0 * l.aw * l.ab,
            cbb: self.cbb - l.ab * l.ab,
        }
    }

    fn coeffs(&self) -> [f64; 6] {
        [self.c0, self.cw, self.cb, self.cww, self.cwb, self.cbb]
    }

    fn same_as(&self, other: &Self) -> bool {
        nearly_equal(&self.coeffs(), &other.coeffs())
    }
}

/// `a0 + aw ω + ab B`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LinearForm {
    pub a0: f64,
    pub aw: f64,
    pub ab: f64,
}

impl LinearForm {
    pub fn new(a0: f64, aw: f64, ab: f64) -> Self {
        Self { a0, aw, ab }
    }

    pub fn eval(&self, w: f64, b: f64) -> f64 {
        self.a0 + self.aw * w + self.ab * b
    }

    fn slope(&self, var: Var) -> f64 {
        match var {
            Var::Omega => self.aw,
            Var::Barrier => self.ab,
        }
    }

    fn same_as(&self, other: &Self) -> bool {
        nearly_equal(&[self.a0, self.aw, self.ab], &[other.a0, other.aw, other.ab])
    }
}

// Exponents built along different arithmetic routes (e.g. q − l² versus a
// directly assembled image exponent) differ in the last bits only.
fn nearly_equal(a: &[f64], b: &[f64]) -> bool {
    a.iter()
        .zip(b)
        .all(|(x, y)| (x - y).abs() <= 1e-13 * x.abs().max(y.abs()).max(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussErfTerm {
    pub poly: Poly,
    pub expo: QuadExponent,
    pub erfc: Option<LinearForm>,
}

impl GaussErfTerm {
    pub fn new(poly: Poly, expo: QuadExponent, erfc: Option<LinearForm>) -> Self {
        Self { poly, expo, erfc }
    }

    pub fn eval(&self, w: f64, b: f64) -> f64 {
        let p = self.poly.eval(w, b);
        if p == 0.0 {
            return 0.0;
        }
        let mut e = self.expo.eval(w, b);
        let mut factor = 1.0;
        if let Some(l) = &self.erfc {
            let x = l.eval(w, b);
            if x > 0.0 {
                e -= x * x;
                factor = erfcx(x);
            } else {
                factor = erfc(x);
            }
        }
        if e < EXP_UNDERFLOW {
            return 0.0;
        }
        p * e.exp() * factor
    }

    fn derivative(&self, var: Var) -> Result<Vec<GaussErfTerm>> {
        let g = self.expo.grad(var);
        let dp = match var {
            Var::Omega => self.poly.d_omega(),
            Var::Barrier => self.poly.d_barrier(),
        };
        let mut main = self.poly.mul_linear(g.a0, g.aw, g.ab)?;
        main.add_assign(&dp)?;
        let mut out = vec![GaussErfTerm::new(main, self.expo, self.erfc)];
        if let Some(l) = &self.erfc {
            let slope = l.slope(var);
            if slope != 0.0 {
                out.push(GaussErfTerm::new(
                    self.poly.scale(-2.0 / PI.sqrt() * slope),
                    self.expo.minus_square(l),
                    None,
                ));
            }
        }
        Ok(out)
    }

    fn same_kind(&self, other: &Self) -> bool {
        self.expo.same_as(&other.expo)
            && match (&self.erfc, &other.erfc) {
                (None, None) => true,
                (Some(a), Some(b)) => a.same_as(b),
                _ => false,
            }
    }
}

/// Constants the terms were built with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermMeta {
    pub t: f64,
    pub alpha: f64,
    pub omega0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermSum {
    pub terms: Vec<GaussErfTerm>,
    pub meta: TermMeta,
}

impl TermSum {
    pub fn empty(meta: TermMeta) -> Self {
        Self {
            terms: Vec::new(),
            meta,
        }
    }

    /// Free Gaussian kernel, plus the image term when `p` carries a barrier.
    ///
    /// The barrier level itself stays symbolic: evaluate at `B = ω_c`.
    pub fn gaussian_kernel(p: &GaussKernelParams) -> Self {
        let meta = TermMeta {
            t: p.t,
            alpha: p.alpha,
            omega0: p.omega0,
        };
        let norm = FRAC_1_SQRT_2PI / p.t.sqrt();
        let mut out = Self::empty(meta);
        out.push(GaussErfTerm::new(
            Poly::constant(norm),
            QuadExponent::free(p.omega0, p.alpha, p.t),
            None,
        ));
        if let Barrier::Up(_) = p.barrier {
            out.push(GaussErfTerm::new(
                Poly::constant(-norm),
                QuadExponent::image(p.omega0, p.alpha, p.t),
                None,
            ));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn has_erfc(&self) -> bool {
        self.terms.iter().any(|t| t.erfc.is_some())
    }

    /// Adds a term, merging it into an existing one of the same kind.
    pub fn push(&mut self, term: GaussErfTerm) {
        if term.poly.is_zero() {
            return;
        }
        if let Some(existing) = self.terms.iter_mut().find(|t| t.same_kind(&term)) {
            // merged polynomials never exceed the larger of the two degrees
            existing
                .poly
                .add_assign(&term.poly)
                .expect("merge stays within degree cap");
        } else {
            self.terms.push(term);
        }
    }

    fn cleaned(mut self) -> Self {
        for t in &mut self.terms {
            t.poly.prune(DROP_THRESHOLD);
        }
        self.terms.retain(|t| !t.poly.is_zero());
        self
    }

    pub fn evaluate(&self, w: f64, b: f64) -> f64 {
        self.terms.iter().map(|t| t.eval(w, b)).sum()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self {
            terms: self
                .terms
                .iter()
                .map(|t| GaussErfTerm::new(t.poly.scale(k), t.expo, t.erfc))
                .collect(),
            meta: self.meta,
        }
        .cleaned()
    }

    pub fn add(&self, other: &TermSum) -> Self {
        let mut out = self.clone();
        for t in &other.terms {
            out.push(t.clone());
        }
        out.cleaned()
    }

    /// Multiplies every term by `e^{σω}`.
    pub fn shift_omega(&self, sigma: f64) -> Self {
        let mut out = self.clone();
        for t in &mut out.terms {
            t.expo.cw += sigma;
        }
        out
    }

    fn derivative_once(&self, var: Var) -> Result<Self> {
        let mut out = Self::empty(self.meta);
        for t in &self.terms {
            for d in t.derivative(var)? {
                out.push(d);
            }
        }
        Ok(out.cleaned())
    }

    /// `order`-th partial derivative in `var`, capped at [`MAX_DIFF_ORDER`].
    pub fn differentiate(&self, var: Var, order: usize) -> Result<Self> {
        self.differentiate_capped(var, order, MAX_DIFF_ORDER)
    }

    pub fn differentiate_capped(&self, var: Var, order: usize, cap: usize) -> Result<Self> {
        if order > cap {
            return Err(Error::config(format!(
                "derivative order {order} exceeds the cap {cap}"
            )));
        }
        (0..order).try_fold(self.clone(), |f, _| f.derivative_once(var))
    }

    /// `(∂ω + ∂B)^order`, equal to the binomial sum of mixed partials.
    pub fn total_derivative(&self, order: usize) -> Result<Self> {
        if order > MAX_DIFF_ORDER {
            return Err(Error::config(format!(
                "derivative order {order} exceeds the cap {MAX_DIFF_ORDER}"
            )));
        }
        (0..order).try_fold(self.clone(), |f, _| {
            let dw = f.derivative_once(Var::Omega)?;
            let db = f.derivative_once(Var::Barrier)?;
            Ok(dw.add(&db))
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::barrier_density_gm;

    fn gm(omega0: f64, alpha: f64, t: f64, b: f64) -> (GaussKernelParams, TermSum) {
        let p = GaussKernelParams::with_barrier(omega0, alpha, t, b);
        (p, TermSum::gaussian_kernel(&p))
    }

    #[test]
    fn kernel_terms_match_closed_form() {
        let (p, f) = gm(0.0, 0.0, 1.0, 1.0);
        assert!((f.evaluate(0.0, 1.0) - 0.344_951_313_888_244_6).abs() < 1e-14);
        let (q, g) = gm(-0.3, 0.4, 0.7, 0.9);
        for &w in &[-2.0, -0.5, 0.0, 0.5, 0.89] {
            let want = barrier_density_gm(&q, w).unwrap();
            assert!((g.evaluate(w, 0.9) - want).abs() < 1e-14);
        }
        assert_eq!(p.t, 1.0);
    }

    #[test]
    fn zero_order_is_identity_and_empty_is_zero() {
        let (_, f) = gm(0.0, 0.1, 1.0, 1.0);
        assert_eq!(f.differentiate(Var::Omega, 0).unwrap(), f);
        let e = TermSum::empty(f.meta);
        assert_eq!(e.evaluate(0.3, 1.0), 0.0);
        assert!(matches!(f.differentiate(Var::Omega, 16), Err(Error::Config(_))));
    }

    #[test]
    fn first_derivative_in_omega() {
        let (_, f) = gm(0.0, 0.0, 1.0, 1.0);
        let d = f.differentiate(Var::Omega, 1).unwrap();
        // only the image term has a slope at the mode of the free term
        let want = -FRAC_1_SQRT_2PI * 2.0 * (-2.0f64).exp();
        assert!((d.evaluate(0.0, 1.0) - want).abs() < 1e-15);
        assert!((want + 0.107_981_933_026_376_1).abs() < 1e-15);
        let h = 1e-5;
        let fd = (f.evaluate(h, 1.0) - f.evaluate(-h, 1.0)) / (2.0 * h);
        assert!((fd - want).abs() < 1e-9);
    }

    #[test]
    fn erfc_term_derivative_matches_finite_difference() {
        let meta = TermMeta {
            t: 1.0,
            alpha: 0.0,
            omega0: 0.0,
        };
        let mut f = TermSum::empty(meta);
        f.push(GaussErfTerm::new(
            Poly::linear(0.5, -1.0, 1.0),
            QuadExponent::drift(0.0, 0.3, 1.0),
            Some(LinearForm::new(0.0, -0.7, 1.4)),
        ));
        for var in [Var::Omega, Var::Barrier] {
            let d = f.differentiate(var, 1).unwrap();
            let h = 1e-5;
            let (w, b) = (0.2, 0.9);
            let fd = match var {
                Var::Omega => (f.evaluate(w + h, b) - f.evaluate(w - h, b)) / (2.0 * h),
                Var::Barrier => (f.evaluate(w, b + h) - f.evaluate(w, b - h)) / (2.0 * h),
            };
            assert!((d.evaluate(w, b) - fd).abs() < 1e-9, "{var:?}");
        }
    }

    #[test]
    fn merging_keeps_term_count_small() {
        let (_, f) = gm(0.0, 0.2, 1.0, 1.0);
        let d9 = f.differentiate(Var::Omega, 9).unwrap();
        assert!(d9.len() <= 2);
        let t9 = f.total_derivative(9).unwrap();
        assert!(t9.len() <= 2);
    }

    #[test]
    fn json_dump_round_trips() {
        let (_, f) = gm(0.0, 0.2, 1.0, 1.0);
        let s = f.to_json().unwrap();
        let back: TermSum = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
