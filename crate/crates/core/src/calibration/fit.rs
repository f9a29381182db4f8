//! Least-squares fit of (σ, κ₃…κ_max) to the Breeden–Litzenberger density.

use argmin::core::{CostFunction, Executor, State};
use argmin::solver::neldermead::NelderMead;
use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{bl_density, regression_diagnostics, Regression, SmileInterpolation, SmileSlice};
use crate::error::{Error, Result};
use crate::expansion::{negative_mass, vanilla_terms_uncached, vanilla_window, CumulantSet, ExpansionConfig};
use crate::martingale::{drift_from_coefficients, RateSpec};
use crate::pricing::{price_vanilla, OptionKind, OptionSpec, PricingConfig};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Multiplies the fit weights by `factor` for log-prices in `[x_lo, x_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionWeight {
    pub x_lo: f64,
    pub x_hi: f64,
    pub factor: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub max_order: usize,
    pub ridge_lambda: f64,
    /// Lowest cumulant order carrying the ridge penalty.
    pub ridge_from_order: usize,
    pub grid_points: usize,
    pub fit_points: usize,
    /// Fraction of the strike range dropped at each end (spline end effects).
    pub trim: f64,
    pub restarts: usize,
    pub max_iters: u64,
    pub sd_tolerance: f64,
    pub region: Option<RegionWeight>,
    pub interpolation: SmileInterpolation,
    pub expansion: ExpansionConfig,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_order: 7,
            ridge_lambda: 1e-3,
            ridge_from_order: 5,
            grid_points: 801,
            fit_points: 161,
            trim: 0.05,
            restarts: 4,
            max_iters: 4000,
            sd_tolerance: 1e-14,
            region: None,
            interpolation: SmileInterpolation::Polynomial,
            expansion: ExpansionConfig::default(),
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if !(3..=15).contains(&self.max_order) {
            return Err(Error::config(format!("max_order must be in 3..=15, got {}", self.max_order)));
        }
        if self.fit_points < 8 || self.grid_points < self.fit_points {
            return Err(Error::config("need grid_points ≥ fit_points ≥ 8"));
        }
        if !(0.0..0.5).contains(&self.trim) || self.ridge_lambda < 0.0 || self.max_iters == 0 {
            return Err(Error::config("trim must be in [0, 0.5), ridge_lambda ≥ 0, max_iters > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFit {
    pub date: NaiveDate,
    pub maturity_months: u32,
    pub forward: f64,
    pub r_acc: f64,
    /// Fitted set with the martingale drift filled in.
    pub params: CumulantSet,
    pub objective: f64,
    pub density_rmse: f64,
    pub negative_mass: f64,
    pub iterations: u64,
    pub converged: bool,
    /// Best objective after each optimizer run.
    pub cost_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceFailure {
    pub date: NaiveDate,
    pub maturity_months: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub schema_version: u32,
    pub config: FitConfig,
    pub slices: Vec<SliceFit>,
    pub failures: Vec<SliceFailure>,
    pub regression: Option<Regression>,
}

impl CalibrationReport {
    pub fn fit_for(&self, date: NaiveDate, maturity_months: u32) -> Option<&SliceFit> {
        self.slices
            .iter()
            .find(|s| s.date == date && s.maturity_months == maturity_months)
    }
}

const PENALTY: f64 = 1e6;

#[derive(Clone)]
pub(crate) struct Objective {
    xs: Vec<f64>,
    target: Vec<f64>,
    weights: Vec<f64>,
    norm: f64,
    t: f64,
    r_acc: f64,
    cfg: FitConfig,
}

impl Objective {
    fn params(&self, theta: &[f64]) -> Result<CumulantSet> {
        let sigma = theta[0];
        let c = CumulantSet::new(sigma, 0.0, self.t, theta[1..].to_vec())?;
        let rates = RateSpec::new(self.r_acc, self.t, sigma)?;
        Ok(c.with_alpha(drift_from_coefficients(&c, &rates, self.cfg.expansion)?))
    }

    /// Model density per unit log-price at the fit points.
    fn model(&self, c: &CumulantSet) -> Result<Vec<f64>> {
        let terms = vanilla_terms_uncached(c, self.cfg.expansion)?;
        Ok(self.xs.iter().map(|&x| terms.evaluate(x / c.sigma, 0.0) / c.sigma).collect())
    }

    /// Penalty on the standardized cumulants `κₙ/tⁿᐟ²`, so its strength does
    /// not depend on maturity.
    fn ridge(&self, theta: &[f64]) -> f64 {
        theta[1..]
            .iter()
            .enumerate()
            .map(|(i, k)| (i + 3, k))
            .filter(|(n, _)| *n >= self.cfg.ridge_from_order)
            .map(|(n, k)| {
                let z = k / self.t.powf(n as f64 / 2.0);
                z * z
            })
            .sum::<f64>()
            * self.cfg.ridge_lambda
    }

    pub(crate) fn value(&self, theta: &[f64]) -> f64 {
        if !(theta[0] > 0.0) || theta.iter().any(|v| !v.is_finite()) {
            return PENALTY;
        }
        let Ok(c) = self.params(theta) else {
            return PENALTY;
        };
        let Ok(pm) = self.model(&c) else {
            return PENALTY;
        };
        let ss: f64 = pm
            .iter()
            .zip(&self.target)
            .zip(&self.weights)
            .map(|((m, p), w)| w * (m - p) * (m - p))
            .sum();
        let v = ss / self.norm + self.ridge(theta);
        if v.is_finite() {
            v
        } else {
            PENALTY
        }
    }
}

impl CostFunction for Objective {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, theta: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.value(theta))
    }
}

fn simplex(theta: &[f64], steps: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![theta.to_vec()];
    for (i, s) in steps.iter().enumerate() {
        let mut v = theta.to_vec();
        v[i] += s;
        out.push(v);
    }
    out
}

pub(crate) fn build_objective(slice: &SmileSlice, cfg: &FitConfig) -> Result<Objective> {
    cfg.validate()?;
    slice.validate()?;
    let bl = bl_density(slice, cfg.interpolation, cfg.grid_points)?;
    let n = bl.strikes.len();
    let skip = (cfg.trim * n as f64).round() as usize;
    let span = n - 2 * skip - 1;
    let idx: Vec<usize> = (0..cfg.fit_points)
        .map(|i| skip + (i * span) / (cfg.fit_points - 1))
        .collect();
    let xs: Vec<f64> = idx.iter().map(|&i| bl.log_price[i]).collect();
    let target: Vec<f64> = idx.iter().map(|&i| bl.density[i]).collect();
    let weights: Vec<f64> = xs
        .iter()
        .zip(&target)
        .map(|(&x, &p)| {
            let boost = cfg
                .region
                .filter(|r| x >= r.x_lo && x <= r.x_hi)
                .map_or(1.0, |r| r.factor);
            p.max(0.0) * boost
        })
        .collect();
    let norm: f64 = weights.iter().zip(&target).map(|(w, p)| w * p * p).sum();
    if !(norm > 0.0) {
        return Err(Error::domain("Breeden–Litzenberger density has no positive mass to fit"));
    }
    let t = slice.t();
    Ok(Objective {
        xs,
        target,
        weights,
        norm,
        t,
        r_acc: slice.r_acc,
        cfg: *cfg,
    })
}

/// Weighted least squares of the expansion density against the
/// Breeden–Litzenberger density of one smile.
///
/// The objective is `Σw(Π_model − Π_BL)²/Σw·Π_BL² + λΣ(κₙ/tⁿᐟ²)²` with `w ∝ Π_BL`,
/// minimised by Nelder–Mead with restarts from the best point. The drift
/// follows the martingale condition at every evaluation. Non-convergence is
/// reported through `converged`, not as an error.
pub fn fit_parameters(slice: &SmileSlice, cfg: &FitConfig) -> Result<SliceFit> {
    let obj = build_objective(slice, cfg)?;
    let t = slice.t();
    let mut theta = vec![0.0; cfg.max_order - 1];
    theta[0] = slice.atm_vol();
    let mut best = obj.value(&theta);
    let mut history = vec![best];
    let mut iterations = 0;
    let mut converged = false;
    let mut scale = 1.0;
    for _ in 0..cfg.restarts.max(1) {
        let steps: Vec<f64> = (0..theta.len())
            .map(|i| scale * if i == 0 { 0.1 * theta[0] } else { 0.02 * t })
            .collect();
        let solver = NelderMead::new(simplex(&theta, &steps))
            .with_sd_tolerance(cfg.sd_tolerance)
            .map_err(|e| Error::config(e.to_string()))?;
        let res = Executor::new(obj.clone(), solver)
            .configure(|s| s.max_iters(cfg.max_iters))
            .run()
            .map_err(|e| Error::Solver {
                message: e.to_string(),
                diagnostics: vec![("objective".into(), best)],
            })?;
        let state = res.state();
        iterations += state.get_iter();
        converged = state.get_iter() < cfg.max_iters;
        let cost = state.get_best_cost();
        let improved = cost < best;
        if improved {
            if let Some(p) = state.get_best_param() {
                theta = p.clone();
            }
            let gain = best - cost;
            best = cost;
            if gain <= 1e-12 * best.max(1e-300) {
                history.push(best);
                break;
            }
        }
        history.push(best);
        scale *= 0.5;
    }

    let params = obj.params(&theta)?;
    let model = obj.model(&params)?;
    let rmse = (model
        .iter()
        .zip(&obj.target)
        .map(|(m, p)| (m - p) * (m - p))
        .sum::<f64>()
        / model.len() as f64)
        .sqrt();
    let (lo, hi) = vanilla_window(&params);
    let terms = vanilla_terms_uncached(&params, cfg.expansion)?;
    Ok(SliceFit {
        date: slice.date,
        maturity_months: slice.maturity_months,
        forward: slice.forward,
        r_acc: slice.r_acc,
        objective: best,
        density_rmse: rmse,
        negative_mass: negative_mass(&terms, lo, hi, 0.0),
        params,
        iterations,
        converged,
        cost_history: history,
    })
}

/// Fits every slice in parallel; failed slices are listed, not fatal.
pub fn fit_surface(slices: &[SmileSlice], cfg: &FitConfig) -> Result<CalibrationReport> {
    cfg.validate()?;
    let results: Vec<std::result::Result<SliceFit, SliceFailure>> = slices
        .par_iter()
        .map(|s| {
            fit_parameters(s, cfg).map_err(|e| SliceFailure {
                date: s.date,
                maturity_months: s.maturity_months,
                message: e.to_string(),
            })
        })
        .collect();
    let mut report = CalibrationReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: *cfg,
        slices: Vec::new(),
        failures: Vec::new(),
        regression: None,
    };
    for r in results {
        match r {
            Ok(f) => report.slices.push(f),
            Err(f) => report.failures.push(f),
        }
    }
    Ok(report)
}

/// Model against smile-implied undiscounted call prices on `per_slice`
/// strikes spread over each slice's quoted range.
pub fn price_regression(slices: &[SmileSlice], report: &CalibrationReport, per_slice: usize) -> Result<Regression> {
    if per_slice < 2 {
        return Err(Error::domain("price regression needs at least two strikes per slice"));
    }
    let pcfg = PricingConfig {
        expansion: report.config.expansion,
        ..PricingConfig::default()
    };
    let pairs: Vec<Vec<(f64, f64)>> = slices
        .par_iter()
        .filter_map(|s| report.fit_for(s.date, s.maturity_months).map(|f| (s, f)))
        .map(|(s, f)| {
            let curve = s.curve(report.config.interpolation)?;
            let (k_lo, k_hi) = curve.strike_range();
            let t = s.t();
            (0..per_slice)
                .map(|i| {
                    let k = k_lo + (k_hi - k_lo) * i as f64 / (per_slice - 1) as f64;
                    let spec = OptionSpec {
                        kind: OptionKind::VanillaCall,
                        s0: s.s0(),
                        strike: k,
                        t,
                        barrier: None,
                        rates: RateSpec::new(s.r_acc, t, f.params.sigma)?,
                        df: 1.0,
                    };
                    let model = price_vanilla(&spec, &f.params, &pcfg)?.price;
                    Ok((model, curve.call(k)))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let (model, market): (Vec<f64>, Vec<f64>) = pairs.into_iter().flatten().unzip();
    regression_diagnostics(&model, &market)
}
