//! Vanilla and knock-up-and-out prices under the expansion density, the
//! Black–Scholes references, and the barrier-grid experiment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ensure_positive, Error, Result};
use crate::expansion::{barrier_terms, negative_mass, vanilla_terms, CumulantSet, ExpansionConfig};
use crate::kernels::{GaussKernelParams, LogPriceCoord};
use crate::martingale::{solve_drift_with, RateSpec};
use crate::moving_barrier::{BarrierPath, MovingBarrierScheme};
use crate::quadrature::QuadOptions;
use crate::special::norm_cdf;
use crate::symbolic::TermSum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptionKind {
    VanillaCall,
    VanillaPut,
    KuoCall,
    KuoPut,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptionSpec {
    pub kind: OptionKind,
    pub s0: f64,
    pub strike: f64,
    pub t: f64,
    /// Barrier in ω units; required for the knock-out kinds.
    pub barrier: Option<BarrierPath>,
    pub rates: RateSpec,
    /// Discount factor applied to the expectation.
    pub df: f64,
}

impl OptionSpec {
    pub fn coord(&self) -> LogPriceCoord {
        LogPriceCoord {
            s0: self.s0,
            sigma: self.rates.sigma,
        }
    }

    /// `k = ln(K/s₀)/σ`.
    pub fn k(&self) -> f64 {
        self.coord().omega(self.strike)
    }

    /// Constant barrier given as a price level.
    pub fn with_barrier_price(mut self, barrier: f64) -> Self {
        self.barrier = Some(BarrierPath::constant(self.coord().omega(barrier)));
        self
    }

    pub fn forward(&self) -> f64 {
        self.s0 * self.rates.r_acc.exp()
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("s0", self.s0)?;
        ensure_positive("t", self.t)?;
        ensure_positive("df", self.df)?;
        if !(self.strike >= 0.0 && self.strike.is_finite()) {
            return Err(Error::domain(format!("strike must be finite and non-negative, got {}", self.strike)));
        }
        if (self.rates.t_n - self.t).abs() > 1e-12 * self.t {
            return Err(Error::config("option maturity and rate horizon differ"));
        }
        if matches!(self.kind, OptionKind::KuoCall | OptionKind::KuoPut) {
            let Some(path) = &self.barrier else {
                return Err(Error::config("knock-out option without a barrier"));
            };
            path.validate(0.0, self.t)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum IntegrationMethod {
    #[default]
    Quadrature,
    /// Term-by-term Gaussian moments; erfc-free densities only.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingConfig {
    pub method: IntegrationMethod,
    pub scheme: MovingBarrierScheme,
    pub expansion: ExpansionConfig,
    /// Absolute tolerance in units of s₀.
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Solve α from the martingale condition; otherwise use the set's α.
    pub solve_drift: bool,
}

impl Default for PricingConfig {
    fn default() -> Self {
        Self {
            method: IntegrationMethod::Quadrature,
            scheme: MovingBarrierScheme::ShethTormen,
            expansion: ExpansionConfig::default(),
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            solve_drift: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PricingDiagnostics {
    pub alpha: f64,
    pub negative_mass: f64,
    pub truncation_error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PricingResult {
    pub price: f64,
    pub diagnostics: PricingDiagnostics,
    /// SHA-256 over the JSON of (spec, cumulants, config).
    pub params_hash: String,
}

fn params_hash(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig) -> Result<String> {
    let blob = serde_json::to_vec(&(spec, c, cfg))?;
    Ok(hex::encode(Sha256::digest(&blob)))
}

fn prepared(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig) -> Result<CumulantSet> {
    spec.validate()?;
    c.validate()?;
    if (c.sigma - spec.rates.sigma).abs() > 1e-14 * c.sigma || (c.t_n - spec.t).abs() > 1e-12 * spec.t {
        return Err(Error::config("cumulant set and option disagree on σ or horizon"));
    }
    if cfg.solve_drift {
        Ok(c.with_alpha(solve_drift_with(c, &spec.rates, cfg.expansion)?.alpha))
    } else {
        Ok(c.clone())
    }
}

struct Integral {
    value: f64,
    error: f64,
    evaluations: usize,
}

fn payoff_integral(
    terms: &TermSum,
    lower: f64,
    upper: f64,
    b: f64,
    spec: &OptionSpec,
    cfg: &PricingConfig,
) -> Result<Integral> {
    let sigma = spec.rates.sigma;
    match cfg.method {
        IntegrationMethod::Analytic => Ok(Integral {
            value: terms.integrate_payoff_analytic(lower, upper, b, sigma, spec.s0, spec.strike)?,
            error: 0.0,
            evaluations: 0,
        }),
        IntegrationMethod::Quadrature => {
            let opts = QuadOptions {
                abs_tol: cfg.abs_tol * spec.s0,
                rel_tol: cfg.rel_tol,
                max_subdivisions: 4000,
            };
            let r = terms.integrate_payoff(lower, upper, b, sigma, spec.s0, spec.strike, opts)?;
            Ok(Integral {
                value: r.value,
                error: r.abs_error,
                evaluations: r.evaluations,
            })
        }
    }
}

fn finish(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig, alpha: f64, sign: f64, it: Integral, neg: f64) -> Result<PricingResult> {
    let price = spec.df * sign * it.value;
    if !price.is_finite() {
        return Err(Error::domain("price is not finite"));
    }
    Ok(PricingResult {
        price,
        diagnostics: PricingDiagnostics {
            alpha,
            negative_mass: neg,
            truncation_error: spec.df * it.error,
            evaluations: it.evaluations,
        },
        params_hash: params_hash(spec, c, cfg)?,
    })
}

/// Vanilla call or put against the unabsorbed density.
pub fn price_vanilla(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig) -> Result<PricingResult> {
    let cs = prepared(spec, c, cfg)?;
    let terms = vanilla_terms(&cs, cfg.expansion)?;
    let k = spec.k();
    let (lo, hi) = GaussKernelParams::free(0.0, cs.alpha, cs.t_n).truncation_domain();
    let neg = negative_mass(&terms, lo, hi, 0.0);
    let (it, sign) = match spec.kind {
        OptionKind::VanillaPut | OptionKind::KuoPut => (payoff_integral(&terms, f64::NEG_INFINITY, k, 0.0, spec, cfg)?, -1.0),
        _ => (payoff_integral(&terms, k, f64::INFINITY, 0.0, spec, cfg)?, 1.0),
    };
    finish(spec, c, cfg, cs.alpha, sign, it, neg)
}

fn price_kuo(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig, call: bool) -> Result<PricingResult> {
    let cs = prepared(spec, c, cfg)?;
    let path = spec
        .barrier
        .as_ref()
        .ok_or_else(|| Error::config("knock-out option without a barrier"))?;
    let b = path.b_n;
    let k = spec.k();
    let terms = barrier_terms(&cs, path, cfg.scheme, cfg.expansion)?;
    let (lo, _) = GaussKernelParams::free(0.0, cs.alpha, cs.t_n).truncation_domain();
    let neg = negative_mass(&terms, lo.min(b), b, b);
    let empty = Integral {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    let (it, sign) = if call {
        // the lower limit is k even though the absorbed density already vanishes above b
        if k >= b {
            (empty, 1.0)
        } else {
            (payoff_integral(&terms, k, b, b, spec, cfg)?, 1.0)
        }
    } else if spec.strike == 0.0 {
        (empty, -1.0)
    } else {
        (payoff_integral(&terms, f64::NEG_INFINITY, k.min(b), b, spec, cfg)?, -1.0)
    };
    finish(spec, c, cfg, cs.alpha, sign, it, neg)
}

pub fn price_kuo_call(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig) -> Result<PricingResult> {
    price_kuo(spec, c, cfg, true)
}

pub fn price_kuo_put(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig) -> Result<PricingResult> {
    price_kuo(spec, c, cfg, false)
}

/// Dispatches on `spec.kind`.
pub fn price(spec: &OptionSpec, c: &CumulantSet, cfg: &PricingConfig) -> Result<PricingResult> {
    match spec.kind {
        OptionKind::VanillaCall | OptionKind::VanillaPut => price_vanilla(spec, c, cfg),
        OptionKind::KuoCall => price_kuo_call(spec, c, cfg),
        OptionKind::KuoPut => price_kuo_put(spec, c, cfg),
    }
}

/// Black–Scholes vanilla on the forward `s₀e^{r_acc}`, discounted with `df`.
pub fn bs_vanilla(spec: &OptionSpec) -> Result<f64> {
    ensure_positive("s0", spec.s0)?;
    ensure_positive("t", spec.t)?;
    let f = spec.forward();
    let k = spec.strike;
    let call = !matches!(spec.kind, OptionKind::VanillaPut | OptionKind::KuoPut);
    if k <= 0.0 {
        return Ok(if call { spec.df * f } else { 0.0 });
    }
    let sd = spec.rates.sigma * spec.t.sqrt();
    let d1 = ((f / k).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    Ok(if call {
        spec.df * (f * norm_cdf(d1) - k * norm_cdf(d2))
    } else {
        spec.df * (k * norm_cdf(-d2) - f * norm_cdf(-d1))
    })
}

/// `∫_{lo}^{hi} e^{aω} N(ω; μ, v) dω`.
fn gauss_exp_integral(a: f64, mu: f64, v: f64, lo: f64, hi: f64) -> f64 {
    let sd = v.sqrt();
    let m = mu + a * v;
    (a * mu + 0.5 * a * a * v).exp() * (norm_cdf((hi - m) / sd) - norm_cdf((lo - m) / sd))
}

/// Knock-up-and-out price under Gaussian log-returns with a constant barrier.
///
/// Calls use the reflection formula in price space (up-and-out call with
/// growth rate g = r_acc/T). Puts integrate the payoff against the image
/// density `N(αT, T) − e^{2αb}N(2b + αT, T)`, which is the same reflection
/// argument written in ω.
pub fn bs_kuo_closed_form(spec: &OptionSpec) -> Result<f64> {
    spec.validate()?;
    let path = spec
        .barrier
        .as_ref()
        .ok_or_else(|| Error::config("knock-out option without a barrier"))?;
    if !path.is_static() {
        return Err(Error::config("closed form needs a constant barrier"));
    }
    let sigma = spec.rates.sigma;
    let t = spec.t;
    let barrier = spec.coord().price(path.b_n);
    let (x, k) = (spec.s0, spec.strike);
    match spec.kind {
        OptionKind::KuoCall => {
            if k >= barrier {
                return Ok(0.0);
            }
            let g = spec.rates.r_acc / t;
            let st = sigma * t.sqrt();
            let dp = |s: f64| (s.ln() + (g + 0.5 * sigma * sigma) * t) / st;
            let dm = |s: f64| (s.ln() + (g - 0.5 * sigma * sigma) * t) / st;
            let disc = (-g * t).exp();
            let p = 2.0 * g / (sigma * sigma);
            let (xk, xb, bk, bx) = (x / k, x / barrier, barrier * barrier / (k * x), barrier / x);
            let v = x * (norm_cdf(dp(xk)) - norm_cdf(dp(xb)))
                - disc * k * (norm_cdf(dm(xk)) - norm_cdf(dm(xb)))
                - barrier * xb.powf(-p) * (norm_cdf(dp(bk)) - norm_cdf(dp(bx)))
                + disc * k * xb.powf(1.0 - p) * (norm_cdf(dm(bk)) - norm_cdf(dm(bx)));
            Ok(spec.df * (g * t).exp() * v)
        }
        OptionKind::KuoPut => {
            if k <= 0.0 {
                return Ok(0.0);
            }
            let alpha = spec.rates.gaussian_drift();
            let b = path.b_n;
            let hi = spec.k().min(b);
            let lo = f64::NEG_INFINITY;
            let leg = |a: f64| {
                gauss_exp_integral(a, alpha * t, t, lo, hi)
                    - (2.0 * alpha * b).exp() * gauss_exp_integral(a, 2.0 * b + alpha * t, t, lo, hi)
            };
            Ok(spec.df * (k * leg(0.0) - x * leg(sigma)))
        }
        _ => Err(Error::config("closed-form knock-out needs a knock-out kind")),
    }
}

/// Market inputs for one maturity of the barrier-grid experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSlice {
    pub maturity_months: u32,
    /// `None` marks a maturity whose calibration is missing.
    pub params: Option<CumulantSet>,
    pub forward: f64,
    pub r_acc: f64,
    pub df: f64,
    pub strikes: Vec<f64>,
    /// Black–Scholes vol per strike, normally the smile's implied vol there;
    /// `None` uses the calibrated σ.
    pub bs_vols: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub strike: f64,
    pub maturity_months: u32,
    pub theta: f64,
    pub barrier: f64,
    pub price_pi: Option<f64>,
    pub price_bs: Option<f64>,
    pub neg_mass: Option<f64>,
}

/// `B = ΘK` when that lies above the forward, otherwise `ΘF`.
pub fn barrier_rule(theta: f64, strike: f64, forward: f64) -> f64 {
    if theta * strike > forward {
        theta * strike
    } else {
        theta * forward
    }
}

/// Knock-up-and-out call table over (strike, maturity, Θ).
pub fn barrier_grid_experiment(
    s0: f64,
    slices: &[ExperimentSlice],
    thetas: &[f64],
    cfg: &PricingConfig,
) -> Result<Vec<ExperimentRow>> {
    ensure_positive("s0", s0)?;
    for s in slices {
        if s.bs_vols.as_ref().is_some_and(|v| v.len() != s.strikes.len()) {
            return Err(Error::config(format!(
                "maturity {}: {} strikes but a different number of BS vols",
                s.maturity_months,
                s.strikes.len()
            )));
        }
    }
    let cells: Vec<(&ExperimentSlice, usize, f64)> = slices
        .iter()
        .flat_map(|s| (0..s.strikes.len()).flat_map(move |i| thetas.iter().map(move |&th| (s, i, th))))
        .collect();
    cells
        .par_iter()
        .map(|&(slice, i, theta)| {
            let strike = slice.strikes[i];
            let barrier = barrier_rule(theta, strike, slice.forward);
            let mut row = ExperimentRow {
                strike,
                maturity_months: slice.maturity_months,
                theta,
                barrier,
                price_pi: None,
                price_bs: None,
                neg_mass: None,
            };
            let Some(c) = &slice.params else {
                return Ok(row);
            };
            let t = slice.maturity_months as f64 / 12.0;
            let spec = |sigma: f64| -> Result<OptionSpec> {
                Ok(OptionSpec {
                    kind: OptionKind::KuoCall,
                    s0,
                    strike,
                    t,
                    barrier: None,
                    rates: RateSpec::new(slice.r_acc, t, sigma)?,
                    df: slice.df,
                }
                .with_barrier_price(barrier))
            };
            let pi = price_kuo_call(&spec(c.sigma)?, c, cfg)?;
            row.price_pi = Some(pi.price);
            row.neg_mass = Some(pi.diagnostics.negative_mass);
            let bs_vol = slice.bs_vols.as_ref().map_or(c.sigma, |v| v[i]);
            row.price_bs = Some(bs_kuo_closed_form(&spec(bs_vol)?)?);
            Ok(row)
        })
        .collect()
}

pub const EXPERIMENT_CSV_HEADER: &str = "strike,maturity_months,theta,barrier,price_pi,price_bs,neg_mass";
