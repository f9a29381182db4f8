//! Smile calibration: delta→strike conversion, smile-implied call prices,
//! the Breeden–Litzenberger density, cumulant fitting and the price
//! regression diagnostic.
//!
//! Prices in this module are undiscounted (forward) premiums, so the
//! density is `K·C″(K)` per unit log-price with no rate factor.

pub mod fit;
pub mod io;
pub mod spline;
pub mod synthetic;

use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::special::{norm_cdf, norm_inv, norm_pdf};

pub use fit::{fit_parameters, fit_surface, price_regression, CalibrationReport, FitConfig, RegionWeight, SliceFit};
pub use spline::CubicSpline;

/// The five quoted deltas of a smile.
pub const STANDARD_DELTAS: [f64; 5] = [0.10, 0.25, 0.50, 0.75, 0.90];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmileQuote {
    pub date: NaiveDate,
    pub maturity_months: u32,
    /// Forward call delta.
    pub delta: f64,
    pub vol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateQuote {
    pub date: NaiveDate,
    pub maturity_months: u32,
    pub r_acc: f64,
    pub forward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SmileSurface {
    pub quotes: Vec<SmileQuote>,
    pub rates: Vec<RateQuote>,
}

/// One (date, maturity) smile with its rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmileSlice {
    pub date: NaiveDate,
    pub maturity_months: u32,
    pub forward: f64,
    pub r_acc: f64,
    /// `(delta, vol)` sorted by delta.
    pub quotes: Vec<(f64, f64)>,
}

impl SmileSurface {
    /// Groups quotes by (date, maturity); each slice needs all five deltas
    /// and a matching rate row.
    pub fn slices(&self) -> Result<Vec<SmileSlice>> {
        let mut groups: BTreeMap<(NaiveDate, u32), Vec<(f64, f64)>> = BTreeMap::new();
        for q in &self.quotes {
            if !(q.vol > 0.0 && q.vol.is_finite()) {
                return Err(Error::domain(format!("vol must be positive, got {} on {}", q.vol, q.date)));
            }
            groups.entry((q.date, q.maturity_months)).or_default().push((q.delta, q.vol));
        }
        let rates: BTreeMap<(NaiveDate, u32), &RateQuote> =
            self.rates.iter().map(|r| ((r.date, r.maturity_months), r)).collect();
        groups
            .into_iter()
            .map(|((date, months), mut quotes)| {
                quotes.sort_by(|a, b| a.0.total_cmp(&b.0));
                let deltas: Vec<f64> = quotes.iter().map(|q| q.0).collect();
                let complete = deltas.len() == STANDARD_DELTAS.len()
                    && deltas.iter().zip(STANDARD_DELTAS).all(|(d, s)| (d - s).abs() < 1e-9);
                if !complete {
                    return Err(Error::config(format!(
                        "smile {date} / {months}m must quote deltas {STANDARD_DELTAS:?}, got {deltas:?}"
                    )));
                }
                let r = rates
                    .get(&(date, months))
                    .ok_or_else(|| Error::config(format!("no rate row for {date} / {months}m")))?;
                let slice = SmileSlice {
                    date,
                    maturity_months: months,
                    forward: r.forward,
                    r_acc: r.r_acc,
                    quotes,
                };
                slice.validate()?;
                Ok(slice)
            })
            .collect()
    }
}

impl SmileSlice {
    pub fn t(&self) -> f64 {
        self.maturity_months as f64 / 12.0
    }

    /// Spot implied by the forward and the accrual.
    pub fn s0(&self) -> f64 {
        self.forward * (-self.r_acc).exp()
    }

    pub fn atm_vol(&self) -> f64 {
        self.quotes
            .iter()
            .min_by(|a, b| (a.0 - 0.5).abs().total_cmp(&(b.0 - 0.5).abs()))
            .map_or(f64::NAN, |q| q.1)
    }

    pub fn validate(&self) -> Result<()> {
        if self.maturity_months == 0 {
            return Err(Error::domain("maturity must be at least one month"));
        }
        ensure_positive("forward", self.forward)?;
        if self.quotes.len() < 4 {
            return Err(Error::domain("a smile needs at least four quotes"));
        }
        for &(d, v) in &self.quotes {
            if !(d > 0.0 && d < 1.0) {
                return Err(Error::domain(format!("delta {d} outside (0, 1)")));
            }
            ensure_positive("vol", v)?;
        }
        Ok(())
    }

    /// Quote strikes in increasing order.
    pub fn strikes(&self) -> Result<Vec<f64>> {
        let mut k = self
            .quotes
            .iter()
            .map(|&(d, v)| delta_to_strike(d, v, self.forward, self.t()))
            .collect::<Result<Vec<f64>>>()?;
        k.sort_by(f64::total_cmp);
        Ok(k)
    }

    pub fn curve(&self, interp: SmileInterpolation) -> Result<SmileCurve> {
        SmileCurve::new(self, interp)
    }
}

/// Forward call delta, premium unadjusted: `K = F·exp(−σ√T·Φ⁻¹(Δ) + ½σ²T)`.
pub fn delta_to_strike(delta: f64, vol: f64, forward: f64, t: f64) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain(format!("delta {delta} outside (0, 1)")));
    }
    ensure_positive("vol", vol)?;
    ensure_positive("forward", forward)?;
    ensure_positive("t", t)?;
    let sd = vol * t.sqrt();
    Ok(forward * (-sd * norm_inv(delta) + 0.5 * sd * sd).exp())
}

/// Undiscounted Black call.
pub fn black_call(forward: f64, strike: f64, vol: f64, t: f64) -> f64 {
    if strike <= 0.0 {
        return forward - strike;
    }
    let sd = vol * t.sqrt();
    if sd <= 0.0 {
        return (forward - strike).max(0.0);
    }
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    forward * norm_cdf(d1) - strike * norm_cdf(d1 - sd)
}

/// Black implied vol of an undiscounted call premium.
pub fn implied_vol(price: f64, forward: f64, strike: f64, t: f64) -> Result<f64> {
    ensure_positive("forward", forward)?;
    ensure_positive("strike", strike)?;
    ensure_positive("t", t)?;
    let intrinsic = (forward - strike).max(0.0);
    if !(price > intrinsic && price < forward) {
        return Err(Error::domain(format!(
            "call premium {price} outside no-arbitrage bounds ({intrinsic}, {forward})"
        )));
    }
    let (mut lo, mut hi) = (1e-8, 10.0);
    let mut v = 0.3;
    for _ in 0..200 {
        let diff = black_call(forward, strike, v, t) - price;
        if diff.abs() < 1e-15 * forward {
            return Ok(v);
        }
        if diff > 0.0 {
            hi = v;
        } else {
            lo = v;
        }
        let sd = v * t.sqrt();
        let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
        let vega = forward * norm_pdf(d1) * t.sqrt();
        let newton = v - diff / vega;
        v = if vega > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-15 {
            return Ok(v);
        }
    }
    Ok(v)
}

/// How vols are interpolated between quotes, in log-moneyness.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum SmileInterpolation {
    /// The unique polynomial through all quotes (degree 4 for five quotes).
    #[default]
    Polynomial,
    /// Not-a-knot cubic spline.
    NotAKnotSpline,
}

#[derive(Debug, Clone)]
enum VolFn {
    Polynomial { y: Vec<f64>, v: Vec<f64> },
    Spline(CubicSpline),
}

impl VolFn {
    fn eval(&self, t: f64) -> f64 {
        match self {
            VolFn::Spline(s) => s.eval(t),
            // Neville's scheme
            VolFn::Polynomial { y, v } => {
                let mut p = v.clone();
                let n = y.len();
                for k in 1..n {
                    for i in 0..n - k {
                        p[i] = ((t - y[i + k]) * p[i] + (y[i] - t) * p[i + 1]) / (y[i] - y[i + k]);
                    }
                }
                p[0]
            }
        }
    }
}

/// Smile as a function of strike, flat beyond the outer quotes.
#[derive(Debug, Clone)]
pub struct SmileCurve {
    pub forward: f64,
    pub t: f64,
    vol: VolFn,
    y_lo: f64,
    y_hi: f64,
}

impl SmileCurve {
    pub fn new(slice: &SmileSlice, interp: SmileInterpolation) -> Result<Self> {
        slice.validate()?;
        let t = slice.t();
        let mut pts: Vec<(f64, f64)> = slice
            .quotes
            .iter()
            .map(|&(d, v)| Ok(((delta_to_strike(d, v, slice.forward, t)? / slice.forward).ln(), v)))
            .collect::<Result<_>>()?;
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (y, v): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
        if y.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::domain("quote strikes are not distinct"));
        }
        let (y_lo, y_hi) = (y[0], y[y.len() - 1]);
        let vol = match interp {
            SmileInterpolation::Polynomial => VolFn::Polynomial { y, v },
            SmileInterpolation::NotAKnotSpline => VolFn::Spline(CubicSpline::not_a_knot(&y, &v)?),
        };
        Ok(Self {
            forward: slice.forward,
            t,
            vol,
            y_lo,
            y_hi,
        })
    }

    pub fn vol(&self, strike: f64) -> f64 {
        self.vol.eval((strike / self.forward).ln().clamp(self.y_lo, self.y_hi))
    }

    pub fn call(&self, strike: f64) -> f64 {
        black_call(self.forward, strike, self.vol(strike), self.t)
    }

    /// Call price with the interpolant continued past the outer quotes
    /// instead of held flat.
    pub fn call_extended(&self, strike: f64) -> f64 {
        let vol = self.vol.eval((strike / self.forward).ln());
        black_call(self.forward, strike, vol, self.t)
    }

    /// Strike range covered by the quotes.
    pub fn strike_range(&self) -> (f64, f64) {
        (self.forward * self.y_lo.exp(), self.forward * self.y_hi.exp())
    }
}

/// Breeden–Litzenberger density on a uniform strike grid, by the natural
/// cubic spline of the call prices and by central differences.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlDensity {
    pub strikes: Vec<f64>,
    /// `ln(K/s₀)`.
    pub log_price: Vec<f64>,
    pub call: Vec<f64>,
    pub d2_spline: Vec<f64>,
    pub d2_numeric: Vec<f64>,
    /// `K·C″` from the spline, per unit log-price.
    pub density: Vec<f64>,
    pub density_numeric: Vec<f64>,
    /// Grid points where the spline density is negative (non-convex C).
    pub negative_points: Vec<usize>,
}

impl BlDensity {
    /// Density per unit ω for scale σ: `Π(ω) = σ·K·C″`.
    pub fn omega_density(&self, sigma: f64) -> Vec<(f64, f64)> {
        self.log_price
            .iter()
            .zip(&self.density)
            .map(|(&x, &p)| (x / sigma, sigma * p))
            .collect()
    }

    /// Trapezoid mass over the covered range.
    pub fn mass(&self) -> f64 {
        self.log_price
            .windows(2)
            .zip(self.density.windows(2))
            .map(|(x, p)| 0.5 * (x[1] - x[0]) * (p[0] + p[1]))
            .sum()
    }
}

const BL_PAD: usize = 32;

pub fn bl_density(slice: &SmileSlice, interp: SmileInterpolation, n_points: usize) -> Result<BlDensity> {
    if n_points < 5 {
        return Err(Error::domain("BL grid needs at least five points"));
    }
    let curve = slice.curve(interp)?;
    let (k_lo, k_hi) = curve.strike_range();
    let h = (k_hi - k_lo) / (n_points - 1) as f64;
    // padding keeps the natural end condition, whose influence decays by
    // about 2−√3 per node, away from the reported points
    let ks: Vec<f64> = (0..n_points + 2 * BL_PAD)
        .map(|i| k_lo + (i as f64 - BL_PAD as f64) * h)
        .collect();
    // the flat wings put a kink in C at the outer quotes; the padding uses the
    // continued interpolant so the spline sees a smooth C across the range
    let cs: Vec<f64> = ks.iter().map(|&k| curve.call_extended(k)).collect();
    let spline = CubicSpline::natural(&ks, &cs)?;
    let m = spline.knot_second_derivatives();
    let s0 = slice.s0();
    let mut out = BlDensity {
        strikes: Vec::with_capacity(n_points),
        log_price: Vec::with_capacity(n_points),
        call: Vec::with_capacity(n_points),
        d2_spline: Vec::with_capacity(n_points),
        d2_numeric: Vec::with_capacity(n_points),
        density: Vec::with_capacity(n_points),
        density_numeric: Vec::with_capacity(n_points),
        negative_points: Vec::new(),
    };
    for i in BL_PAD..n_points + BL_PAD {
        let k = ks[i];
        let numeric = (cs[i + 1] - 2.0 * cs[i] + cs[i - 1]) / (h * h);
        out.strikes.push(k);
        out.log_price.push((k / s0).ln());
        out.call.push(cs[i]);
        out.d2_spline.push(m[i]);
        out.d2_numeric.push(numeric);
        out.density.push(k * m[i]);
        out.density_numeric.push(k * numeric);
        if m[i] < 0.0 {
            out.negative_points.push(i - BL_PAD);
        }
    }
    Ok(out)
}

/// Ordinary least squares `model = a_p·market + b_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub a_p: f64,
    pub b_p: f64,
    pub r2: f64,
    pub n: usize,
}

pub fn regression_diagnostics(model: &[f64], market: &[f64]) -> Result<Regression> {
    if model.len() != market.len() {
        return Err(Error::domain("model and market series differ in length"));
    }
    if model.len() < 3 {
        return Err(Error::domain("regression needs at least three points"));
    }
    let n = model.len() as f64;
    let mx = market.iter().sum::<f64>() / n;
    let my = model.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (&x, &y) in market.iter().zip(model) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::domain("market prices have no spread"));
    }
    let a_p = sxy / sxx;
    let b_p = my - a_p * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(Regression {
        a_p,
        b_p,
        r2,
        n: model.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{free_density, GaussKernelParams};
    use crate::martingale::RateSpec;

    fn flat(vol: f64, months: u32, forward: f64, r_acc: f64) -> SmileSlice {
        SmileSlice {
            date: NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(),
            maturity_months: months,
            forward,
            r_acc,
            quotes: STANDARD_DELTAS.iter().map(|&d| (d, vol)).collect(),
        }
    }

    #[test]
    fn delta_to_strike_examples() {
        let k = delta_to_strike(0.25, 0.2, 1.0, 1.0).unwrap();
        assert!((k - 0.154_898_f64.exp()).abs() < 1e-5);
        assert!((k - 1.167_53).abs() < 1e-5);
        let atm = delta_to_strike(0.5, 0.2, 1.3, 0.5).unwrap();
        assert!((atm - 1.3 * (0.5 * 0.04 * 0.5f64).exp()).abs() < 1e-14);
        let ks: Vec<f64> = STANDARD_DELTAS.iter().map(|&d| delta_to_strike(d, 0.2, 1.0, 1.0).unwrap()).collect();
        assert!(ks.windows(2).all(|w| w[1] < w[0]));
        assert!(matches!(delta_to_strike(1.0, 0.2, 1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn implied_vol_round_trip() {
        for &(k, v, t) in &[(0.95, 0.1, 0.1), (1.0, 0.25, 1.0), (1.4, 0.6, 2.0)] {
            let p = black_call(1.05, k, v, t);
            assert!((implied_vol(p, 1.05, k, t).unwrap() - v).abs() < 1e-10);
        }
        assert!(implied_vol(0.01, 1.0, 0.5, 1.0).is_err());
    }

    #[test]
    fn regression_examples() {
        let x = [1.0, 2.0, 3.5, 4.0];
        let r = regression_diagnostics(&x, &x).unwrap();
        assert_eq!((r.a_p, r.b_p, r.r2), (1.0, 0.0, 1.0));
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let r = regression_diagnostics(&y, &x).unwrap();
        assert!((r.a_p - 2.0).abs() < 1e-15 && r.b_p.abs() < 1e-15 && (r.r2 - 1.0).abs() < 1e-15);
        assert!(regression_diagnostics(&x[..2], &x[..2]).is_err());
    }

    #[test]
    fn flat_smile_density_is_gaussian() {
        for &(vol, months, r_acc) in &[(0.2, 12, 0.05), (0.12, 3, 0.01)] {
            let slice = flat(vol, months, 1.0, r_acc);
            let bl = bl_density(&slice, SmileInterpolation::default(), 801).unwrap();
            let t = slice.t();
            let alpha = RateSpec::new(r_acc, t, vol).unwrap().gaussian_drift();
            let p = GaussKernelParams::free(0.0, alpha, t);
            let n = bl.strikes.len();
            let peak = bl.density.iter().cloned().fold(0.0, f64::max);
            for i in n / 10..n - n / 10 {
                let x = bl.log_price[i];
                let want = free_density(&p, x / vol).unwrap() / vol;
                assert!((bl.density[i] - want).abs() < 1e-4 * peak, "{i}: {} {want}", bl.density[i]);
                let rel = (bl.d2_spline[i] - bl.d2_numeric[i]).abs() / bl.d2_numeric[i].abs();
                assert!(rel < 1e-4, "{i}: {rel}");
            }
            let mass = bl.mass();
            assert!(mass > 0.5 && mass <= 1.0, "{mass}");
            assert!(bl.negative_points.is_empty());
        }
    }

    #[test]
    fn slices_need_all_deltas_and_rates() {
        let date = NaiveDate::from_ymd_opt(2024, 1, 2).unwrap();
        let mut surface = SmileSurface {
            quotes: STANDARD_DELTAS
                .iter()
                .map(|&delta| SmileQuote {
                    date,
                    maturity_months: 1,
                    delta,
                    vol: 0.15,
                })
                .collect(),
            rates: vec![RateQuote {
                date,
                maturity_months: 1,
                r_acc: 0.004,
                forward: 5.02,
            }],
        };
        let s = surface.slices().unwrap();
        assert_eq!(s.len(), 1);
        assert!((s[0].s0() - 5.02 * (-0.004f64).exp()).abs() < 1e-15);
        surface.quotes.pop();
        assert!(matches!(surface.slices(), Err(Error::Config(_))));
    }
}
