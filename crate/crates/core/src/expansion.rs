//! Cumulant-expansion densities around the Gaussian kernels.
//!
//! With `D = ∂ω + ∂B` (which equals the binomial mix of mixed partials),
//!
//! ```text
//! Π = Π^mb + Σₙ (−1)ⁿ aₙ Dⁿ Π^mb,
//! aₙ = κₙ/n! + ½ Σ_{i+j=n; i,j≥3} κᵢκⱼ/(i! j!)
//! ```
//!
//! Without a barrier only the free term remains and D reduces to ∂ω.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, LazyLock};

use num_rational::Ratio;
use parking_lot::RwLock;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::kernels::GaussKernelParams;
use crate::moving_barrier::{as_terms, BarrierPath, MbParams, MovingBarrierScheme, StSeries};
use crate::quadrature::{integrate, QuadOptions};
use crate::symbolic::{TermSum, Var};

pub const MAX_ORDER: usize = 15;

const CACHE_CAPACITY: usize = 4096;

/// Model parameters at one horizon. κ₁ lives in `alpha`, κ₂ is the variance `t_n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CumulantSet {
    pub sigma: f64,
    pub alpha: f64,
    pub t_n: f64,
    /// `kappas[n − 3] = κₙ`.
    pub kappas: Vec<f64>,
}

impl CumulantSet {
    pub fn new(sigma: f64, alpha: f64, t_n: f64, kappas: Vec<f64>) -> Result<Self> {
        let c = Self {
            sigma,
            alpha,
            t_n,
            kappas,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn gaussian(sigma: f64, alpha: f64, t_n: f64) -> Self {
        Self {
            sigma,
            alpha,
            t_n,
            kappas: Vec::new(),
        }
    }

    /// Sets κₙ, growing the list with zeros as needed.
    pub fn with_kappa(mut self, n: usize, value: f64) -> Result<Self> {
        if !(3..=MAX_ORDER).contains(&n) {
            return Err(Error::config(format!("cumulant order {n} outside 3..={MAX_ORDER}")));
        }
        if self.kappas.len() < n - 2 {
            self.kappas.resize(n - 2, 0.0);
        }
        self.kappas[n - 3] = value;
        Ok(self)
    }

    pub fn with_alpha(&self, alpha: f64) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("sigma", self.sigma)?;
        ensure_positive("t_n", self.t_n)?;
        if self.max_order() > MAX_ORDER {
            return Err(Error::config(format!(
                "expansion order {} exceeds {MAX_ORDER}",
                self.max_order()
            )));
        }
        if !self.alpha.is_finite() || self.kappas.iter().any(|k| !k.is_finite()) {
            return Err(Error::domain("cumulants must be finite"));
        }
        Ok(())
    }

    pub fn kappa(&self, n: usize) -> f64 {
        if n < 3 {
            0.0
        } else {
            self.kappas.get(n - 3).copied().unwrap_or(0.0)
        }
    }

    /// Highest order carried, at least 2.
    pub fn max_order(&self) -> usize {
        self.kappas.len() + 2
    }

    pub fn is_gaussian(&self) -> bool {
        self.kappas.iter().all(|&k| k == 0.0)
    }

    fn cache_key(&self) -> Vec<u64> {
        let mut k = vec![self.sigma.to_bits(), self.alpha.to_bits(), self.t_n.to_bits()];
        k.extend(self.kappas.iter().map(|v| v.to_bits()));
        k
    }
}

/// Sign of the κ₃κ₅ product in the order-8 coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum CoefficientSigns {
    /// Every product enters with +, as the exponential generating rule gives.
    #[default]
    GenerationRule,
    /// Order 8 carries −κ₃κ₅/(3!5!), as in the printed expansion.
    AsPrinted,
}

/// A monomial in the cumulants: κᵢ alone (`j == 0`) or κᵢκⱼ with i ≤ j.
pub type KappaMonomial = (usize, usize);

/// `aₙ` as exact rationals over cumulant monomials.
pub fn coefficient_rational(n: usize, signs: CoefficientSigns) -> BTreeMap<KappaMonomial, Ratio<i128>> {
    let fact = |k: usize| (1..=k as i128).product::<i128>();
    let mut out = BTreeMap::new();
    if n < 3 {
        return out;
    }
    out.insert((n, 0), Ratio::new(1, fact(n)));
    for i in 3..=n.saturating_sub(3) {
        let j = n - i;
        if j < 3 {
            continue;
        }
        // the ordered pair (i, j) and (j, i) each carry ½
        let half = Ratio::new(1, 2 * fact(i) * fact(j));
        *out.entry((i.min(j), i.max(j))).or_insert_with(|| Ratio::from_integer(0)) += half;
    }
    if signs == CoefficientSigns::AsPrinted && n == 8 {
        if let Some(v) = out.get_mut(&(3, 5)) {
            *v = -*v;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionCoefficients {
    /// `a[n]` for n = 0..=max_order; entries below 3 are zero.
    pub a: Vec<f64>,
}

impl ExpansionCoefficients {
    pub fn get(&self, n: usize) -> f64 {
        self.a.get(n).copied().unwrap_or(0.0)
    }
}

pub fn expansion_coefficients(c: &CumulantSet) -> ExpansionCoefficients {
    expansion_coefficients_with(c, CoefficientSigns::GenerationRule)
}

pub fn expansion_coefficients_with(c: &CumulantSet, signs: CoefficientSigns) -> ExpansionCoefficients {
    let max = c.max_order();
    let mut a = vec![0.0; max + 1];
    for (n, slot) in a.iter_mut().enumerate().skip(3) {
        *slot = coefficient_rational(n, signs)
            .iter()
            .map(|(&(i, j), r)| {
                let w = *r.numer() as f64 / *r.denom() as f64;
                if j == 0 {
                    w * c.kappa(i)
                } else {
                    w * c.kappa(i) * c.kappa(j)
                }
            })
            .sum();
    }
    ExpansionCoefficients { a }
}

/// Switches that reproduce printed variants for comparison runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ExpansionConfig {
    pub signs: CoefficientSigns,
    pub st_series: StSeries,
}

/// Read-mostly memo of expansion term sums.
pub struct ExpansionCache {
    map: RwLock<HashMap<Vec<u64>, Arc<TermSum>>>,
}

impl ExpansionCache {
    fn new() -> Self {
        Self {
            map: RwLock::new(HashMap::new()),
        }
    }

    fn get_or_build(&self, key: Vec<u64>, build: impl FnOnce() -> Result<TermSum>) -> Result<Arc<TermSum>> {
        if let Some(v) = self.map.read().get(&key) {
            return Ok(Arc::clone(v));
        }
        let built = Arc::new(build()?);
        let mut w = self.map.write();
        if w.len() >= CACHE_CAPACITY {
            w.clear();
        }
        Ok(Arc::clone(w.entry(key).or_insert(built)))
    }
}

static CACHE: LazyLock<ExpansionCache> = LazyLock::new(ExpansionCache::new);

fn expand(base: &TermSum, coeffs: &ExpansionCoefficients, total: bool) -> Result<TermSum> {
    let mut out = base.clone();
    let mut deriv = base.clone();
    let last = (3..coeffs.a.len()).rev().find(|&n| coeffs.a[n] != 0.0);
    let Some(last) = last else {
        return Ok(out);
    };
    for n in 1..=last {
        deriv = if total {
            deriv.total_derivative(1)?
        } else {
            deriv.differentiate(Var::Omega, 1)?
        };
        let a = coeffs.get(n);
        if a != 0.0 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            out = out.add(&deriv.scale(sign * a));
        }
    }
    Ok(out)
}

/// Term sum of the unabsorbed expansion density, started at ω₀ = 0.
pub fn vanilla_terms(c: &CumulantSet, cfg: ExpansionConfig) -> Result<Arc<TermSum>> {
    c.validate()?;
    let mut key = c.cache_key();
    key.extend([0, cfg.signs as u64]);
    CACHE.get_or_build(key, || vanilla_terms_uncached(c, cfg))
}

/// [`vanilla_terms`] without the memo; for callers that sweep α.
pub fn vanilla_terms_uncached(c: &CumulantSet, cfg: ExpansionConfig) -> Result<TermSum> {
    c.validate()?;
    let base = TermSum::gaussian_kernel(&GaussKernelParams::free(0.0, c.alpha, c.t_n));
    expand(&base, &expansion_coefficients_with(c, cfg.signs), false)
}

/// Term sum of the absorbed expansion density in `(ωₙ, Bₙ)`, started at ω₀ = 0.
pub fn barrier_terms(
    c: &CumulantSet,
    path: &BarrierPath,
    scheme: MovingBarrierScheme,
    cfg: ExpansionConfig,
) -> Result<Arc<TermSum>> {
    c.validate()?;
    let mut key = c.cache_key();
    key.extend([1, cfg.signs as u64, cfg.st_series as u64, scheme as u64, path.b_n.to_bits()]);
    key.extend(path.derivs.iter().map(|d| d.to_bits()));
    CACHE.get_or_build(key, || {
        let mb = as_terms(&MbParams::new(0.0, c.alpha, c.t_n), path, scheme, cfg.st_series)?;
        expand(&mb, &expansion_coefficients_with(c, cfg.signs), true)
    })
}

pub fn density_vanilla(c: &CumulantSet, omega_n: f64) -> Result<f64> {
    Ok(vanilla_terms(c, ExpansionConfig::default())?.evaluate(omega_n, 0.0))
}

/// Absorbed expansion density; `None` for the barrier gives [`density_vanilla`].
pub fn density_barrier(
    c: &CumulantSet,
    barrier: Option<&BarrierPath>,
    scheme: MovingBarrierScheme,
    omega_n: f64,
) -> Result<f64> {
    density_barrier_with(c, barrier, scheme, ExpansionConfig::default(), omega_n)
}

pub fn density_barrier_with(
    c: &CumulantSet,
    barrier: Option<&BarrierPath>,
    scheme: MovingBarrierScheme,
    cfg: ExpansionConfig,
    omega_n: f64,
) -> Result<f64> {
    let Some(path) = barrier else {
        return Ok(vanilla_terms(c, cfg)?.evaluate(omega_n, 0.0));
    };
    if omega_n >= path.b_n {
        return Ok(0.0);
    }
    Ok(barrier_terms(c, path, scheme, cfg)?.evaluate(omega_n, path.b_n))
}

/// `∫ max(−Π, 0) dω` over `[lower, upper]` at barrier level `b`.
pub fn negative_mass(terms: &TermSum, lower: f64, upper: f64, b: f64) -> f64 {
    if !(upper > lower) {
        return 0.0;
    }
    integrate(
        |w| (-terms.evaluate(w, b)).max(0.0),
        lower,
        upper,
        QuadOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-8,
            max_subdivisions: 2000,
        },
    )
    .value
}

/// Integration window `[μ − 12√t, μ + 12√t]` of the expansion at ω₀ = 0.
pub fn vanilla_window(c: &CumulantSet) -> (f64, f64) {
    GaussKernelParams::free(0.0, c.alpha, c.t_n).truncation_domain()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{barrier_density_gm, free_density};
    use proptest::prelude::*;

    fn r(n: i128, d: i128) -> Ratio<i128> {
        Ratio::new(n, d)
    }

    #[test]
    fn printed_brackets_at_orders_six_to_eight() {
        let a6 = coefficient_rational(6, CoefficientSigns::GenerationRule);
        assert_eq!(a6.len(), 2);
        assert_eq!(a6[&(3, 3)], r(1, 2) * r(1, 6) * r(1, 6));
        assert_eq!(a6[&(6, 0)], r(1, 720));
        let a7 = coefficient_rational(7, CoefficientSigns::GenerationRule);
        assert_eq!(a7.len(), 2);
        assert_eq!(a7[&(3, 4)], r(1, 6) * r(1, 24));
        assert_eq!(a7[&(7, 0)], r(1, 5040));
        let a8 = coefficient_rational(8, CoefficientSigns::GenerationRule);
        assert_eq!(a8[&(4, 4)], r(1, 2) * r(1, 24) * r(1, 24));
        assert_eq!(a8[&(3, 5)], r(1, 6) * r(1, 120));
        let printed = coefficient_rational(8, CoefficientSigns::AsPrinted);
        assert_eq!(printed[&(3, 5)], -r(1, 6) * r(1, 120));
        for n in (3..=15).filter(|&n| n != 8) {
            assert_eq!(
                coefficient_rational(n, CoefficientSigns::GenerationRule),
                coefficient_rational(n, CoefficientSigns::AsPrinted)
            );
        }
    }

    #[test]
    fn numeric_coefficient_examples() {
        let c = CumulantSet::gaussian(0.2, 0.0, 1.0)
            .with_kappa(15, 0.0)
            .unwrap()
            .with_kappa(3, 0.1)
            .unwrap();
        let a = expansion_coefficients(&c);
        assert!((a.get(3) - 0.1 / 6.0).abs() < 1e-17);
        assert!((a.get(6) - 0.5 * (0.1f64 / 6.0).powi(2)).abs() < 1e-18);
        assert!((a.get(6) - 1.388_888_888_888_889e-4).abs() < 1e-18);
        assert_eq!(a.get(4), 0.0);
        assert_eq!(a.get(5), 0.0);
        let c4 = CumulantSet::gaussian(0.2, 0.0, 1.0)
            .with_kappa(4, 0.05)
            .unwrap()
            .with_kappa(8, 0.0)
            .unwrap();
        let a4 = expansion_coefficients(&c4);
        assert!((a4.get(8) - 2.170_138_888_888_889e-6).abs() < 1e-20);
        let zero = CumulantSet::gaussian(0.2, 0.0, 1.0).with_kappa(15, 0.0).unwrap();
        assert!(expansion_coefficients(&zero).a.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gaussian_limits() {
        let c = CumulantSet::gaussian(0.2, 0.15, 1.0).with_kappa(9, 0.0).unwrap();
        let path = BarrierPath::constant(1.3);
        for &w in &[-2.0, -0.4, 0.3, 1.2] {
            let free = free_density(&GaussKernelParams::free(0.0, 0.15, 1.0), w).unwrap();
            assert!((density_vanilla(&c, w).unwrap() - free).abs() < 1e-15);
            let gm = barrier_density_gm(&GaussKernelParams::with_barrier(0.0, 0.15, 1.0, 1.3), w).unwrap();
            let d = density_barrier(&c, Some(&path), MovingBarrierScheme::ShethTormen, w).unwrap();
            assert!((d - gm).abs() < 1e-14);
        }
    }

    #[test]
    fn no_barrier_equals_vanilla() {
        let c = CumulantSet::new(0.2, 0.1, 0.5, vec![0.05, -0.02, 0.01]).unwrap();
        for &w in &[-1.0, 0.0, 0.7] {
            assert_eq!(
                density_barrier(&c, None, MovingBarrierScheme::Adiabatic, w).unwrap(),
                density_vanilla(&c, w).unwrap()
            );
        }
    }

    #[test]
    fn total_derivative_equals_binomial_mix() {
        let c = CumulantSet::gaussian(0.2, 0.1, 0.8);
        let path = BarrierPath::polynomial(1.0, vec![0.1, 0.2]);
        let mb = as_terms(&MbParams::new(0.0, c.alpha, c.t_n), &path, MovingBarrierScheme::Adiabatic, StSeries::TimePowers)
            .unwrap();
        let n = 4;
        let total = mb.total_derivative(n).unwrap();
        let binom = [1.0, 4.0, 6.0, 4.0, 1.0];
        for &w in &[-0.5, 0.2, 0.9] {
            let mut sum = 0.0;
            for (j, b) in binom.iter().enumerate() {
                let d = mb
                    .differentiate(Var::Omega, n - j)
                    .unwrap()
                    .differentiate(Var::Barrier, j)
                    .unwrap();
                sum += b * d.evaluate(w, 1.0);
            }
            let t = total.evaluate(w, 1.0);
            assert!((t - sum).abs() < 1e-11 * sum.abs().max(1.0), "{t} {sum}");
        }
    }

    #[test]
    fn density_vanishes_at_the_barrier() {
        let c = CumulantSet::new(0.2, 0.1, 1.0, vec![0.05, -0.05, 0.03, 0.02]).unwrap();
        let path = BarrierPath::constant(1.2);
        let terms = barrier_terms(&c, &path, MovingBarrierScheme::ShethTormen, ExpansionConfig::default()).unwrap();
        let peak = (0..200)
            .map(|i| terms.evaluate(-3.0 + 4.2 * i as f64 / 200.0, 1.2).abs())
            .fold(0.0, f64::max);
        let edge = terms.evaluate(1.2 - 1e-9, 1.2).abs();
        assert!(edge <= 1e-6 * peak, "{edge} vs {peak}");
    }

    #[test]
    fn skewness_matches_kappa3() {
        let c = CumulantSet::gaussian(0.2, 0.0, 1.0).with_kappa(3, 0.1).unwrap();
        let terms = vanilla_terms(&c, ExpansionConfig::default()).unwrap();
        let (lo, hi) = (-14.0, 14.0);
        let m = |k: i32| {
            integrate(|w| w.powi(k) * terms.evaluate(w, 0.0), lo, hi, QuadOptions::default()).value
        };
        let (m1, m2, m3) = (m(1), m(2), m(3));
        let k3 = m3 - 3.0 * m1 * m2 + 2.0 * m1.powi(3);
        assert!((k3 - 0.1).abs() < 1e-6);
    }

    #[test]
    fn cache_returns_shared_value() {
        let c = CumulantSet::new(0.3, 0.05, 0.4, vec![0.01, 0.02]).unwrap();
        let a = vanilla_terms(&c, ExpansionConfig::default()).unwrap();
        let b = vanilla_terms(&c, ExpansionConfig::default()).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn order_cap() {
        assert!(CumulantSet::gaussian(0.2, 0.0, 1.0).with_kappa(16, 0.1).is_err());
        assert!(CumulantSet::new(0.2, 0.0, 1.0, vec![0.0; 14]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn vanilla_density_has_unit_mass(ks in proptest::collection::vec(-0.1f64..0.1, 1..=13), alpha in -0.5f64..0.5, t in 0.1f64..2.0) {
            let c = CumulantSet::new(0.2, alpha, t, ks).unwrap();
            let terms = vanilla_terms(&c, ExpansionConfig::default()).unwrap();
            let mass = terms.integrate_analytic(f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap();
            prop_assert!((mass - 1.0).abs() < 1e-8);
        }

        #[test]
        fn single_cumulant_is_reproduced(n in 3usize..=6, k in -0.1f64..0.1) {
            let c = CumulantSet::gaussian(0.2, 0.0, 1.0).with_kappa(n, k).unwrap();
            let terms = vanilla_terms(&c, ExpansionConfig::default()).unwrap();
            let raw: Vec<f64> = (0..=n)
                .map(|j| {
                    let mut p = terms.clone();
                    for t in Arc::make_mut(&mut p).terms.iter_mut() {
                        for _ in 0..j {
                            t.poly = t.poly.mul_linear(0.0, 1.0, 0.0).unwrap();
                        }
                    }
                    p.integrate_analytic(f64::NEG_INFINITY, f64::INFINITY, 0.0).unwrap()
                })
                .collect();
            let kn = cumulant_from_moments(&raw, n);
            prop_assert!((kn - k).abs() < 1e-5);
        }
    }

    /// n-th cumulant from raw moments m₀..mₙ via the standard recursion.
    fn cumulant_from_moments(m: &[f64], n: usize) -> f64 {
        let binom = |a: usize, b: usize| -> f64 { (0..b).fold(1.0, |acc, i| acc * (a - i) as f64 / (i + 1) as f64) };
        let mut k = vec![0.0; n + 1];
        for j in 1..=n {
            let mut v = m[j];
            for i in 1..j {
                v -= binom(j - 1, i - 1) * k[i] * m[j - i];
            }
            k[j] = v;
        }
        k[n]
    }
}
