//! Smiles generated from a known expansion density, for round-trip tests.

use chrono::NaiveDate;

use super::{delta_to_strike, implied_vol, RateQuote, SmileQuote, SmileSlice, SmileSurface, STANDARD_DELTAS};
use crate::error::{Error, Result};
use crate::expansion::CumulantSet;
use crate::martingale::RateSpec;
use crate::pricing::{price_vanilla, OptionKind, OptionSpec, PricingConfig};

/// Undiscounted model call premium under `c` with the martingale drift.
pub fn model_call(c: &CumulantSet, forward: f64, r_acc: f64, strike: f64) -> Result<f64> {
    let t = c.t_n;
    let spec = OptionSpec {
        kind: OptionKind::VanillaCall,
        s0: forward * (-r_acc).exp(),
        strike,
        t,
        barrier: None,
        rates: RateSpec::new(r_acc, t, c.sigma)?,
        df: 1.0,
    };
    Ok(price_vanilla(&spec, c, &PricingConfig::default())?.price)
}

/// Five-delta smile of the model density. Each quote solves the fixed point
/// strike(Δ, vol) ↔ implied vol(strike).
pub fn synthetic_slice(c: &CumulantSet, date: NaiveDate, maturity_months: u32, forward: f64, r_acc: f64) -> Result<SmileSlice> {
    let t = maturity_months as f64 / 12.0;
    if (c.t_n - t).abs() > 1e-12 {
        return Err(Error::config("cumulant horizon does not match the maturity"));
    }
    let mut quotes = Vec::with_capacity(STANDARD_DELTAS.len());
    for &delta in &STANDARD_DELTAS {
        let mut vol = c.sigma;
        let mut done = false;
        for _ in 0..100 {
            let k = delta_to_strike(delta, vol, forward, t)?;
            let next = implied_vol(model_call(c, forward, r_acc, k)?, forward, k, t)?;
            let step = (next - vol).abs();
            vol = next;
            if step < 1e-13 {
                done = true;
                break;
            }
        }
        if !done {
            return Err(Error::Solver {
                message: format!("delta {delta} strike fixed point did not settle"),
                diagnostics: vec![("vol".into(), vol)],
            });
        }
        quotes.push((delta, vol));
    }
    Ok(SmileSlice {
        date,
        maturity_months,
        forward,
        r_acc,
        quotes,
    })
}

/// Surface over several maturities with a flat annual accrual rate.
pub fn synthetic_surface(sets: &[(u32, CumulantSet)], date: NaiveDate, s0: f64, rate: f64) -> Result<SmileSurface> {
    let mut surface = SmileSurface::default();
    for (months, c) in sets {
        let r_acc = rate * *months as f64 / 12.0;
        let forward = s0 * r_acc.exp();
        let slice = synthetic_slice(c, date, *months, forward, r_acc)?;
        surface.quotes.extend(slice.quotes.iter().map(|&(delta, vol)| SmileQuote {
            date,
            maturity_months: *months,
            delta,
            vol,
        }));
        surface.rates.push(RateQuote {
            date,
            maturity_months: *months,
            r_acc,
            forward,
        });
    }
    Ok(surface)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::fit::{fit_parameters, FitConfig};

    #[test]
    fn gaussian_set_gives_a_flat_smile() {
        let c = CumulantSet::gaussian(0.18, 0.0, 0.5);
        let s = synthetic_slice(&c, NaiveDate::from_ymd_opt(2024, 1, 2).unwrap(), 6, 1.01, 0.01).unwrap();
        for &(_, v) in &s.quotes {
            assert!((v - 0.18).abs() < 1e-9);
        }
    }

    #[test]
    fn round_trip_recovers_parameters() {
        let t = 1.0;
        let c = CumulantSet::new(0.2, 0.0, t, vec![-0.06 * t, 0.04 * t, 0.0, 0.0, 0.0]).unwrap();
        let date = NaiveDate::from_ymd_opt(2024, 1, 2).unwrap();
        let slice = synthetic_slice(&c, date, 12, 1.02, 0.02).unwrap();
        let fit = fit_parameters(&slice, &FitConfig::default()).unwrap();
        assert!((fit.params.sigma / 0.2 - 1.0).abs() < 5e-3);
        assert!((fit.params.kappa(3) / -0.06 - 1.0).abs() < 0.05);
        assert!((fit.params.kappa(4) / 0.04 - 1.0).abs() < 0.05);
        assert!(fit.cost_history.windows(2).all(|w| w[1] <= w[0]));
    }
}
