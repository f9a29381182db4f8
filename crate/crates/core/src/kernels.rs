//! Gaussian Markov transition densities in the scaled log-price coordinate,
//! with and without an absorbing upper barrier.
//!
//! Every density here lives in ω = ln(S/S₀)/σ. A kernel started at ω₀ with
//! drift α after time t has mean ω₀ + αt and variance t.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::special::{norm_cdf, FRAC_1_SQRT_2PI};

/// Half-width of the integration window in standard deviations.
pub const TRUNCATION_SIGMAS: f64 = 12.0;

/// Maps spot prices to the scaled log-price ω and back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPriceCoord {
    pub s0: f64,
    pub sigma: f64,
}

impl LogPriceCoord {
    pub fn new(s0: f64, sigma: f64) -> Result<Self> {
        ensure_positive("s0", s0)?;
        ensure_positive("sigma", sigma)?;
        Ok(Self { s0, sigma })
    }

    pub fn omega(&self, price: f64) -> f64 {
        (price / self.s0).ln() / self.sigma
    }

    pub fn price(&self, omega: f64) -> f64 {
        self.s0 * (self.sigma * omega).exp()
    }
}

/// Absorbing barrier level in ω units. `None` is the infinite barrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Barrier {
    None,
    Up(f64),
}

impl Barrier {
    pub fn level(&self) -> Option<f64> {
        match *self {
            Barrier::None => None,
            Barrier::Up(b) => Some(b),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussKernelParams {
    pub omega0: f64,
    pub alpha: f64,
    pub t: f64,
    pub barrier: Barrier,
}

impl GaussKernelParams {
    pub fn free(omega0: f64, alpha: f64, t: f64) -> Self {
        Self {
            omega0,
            alpha,
            t,
            barrier: Barrier::None,
        }
    }

    pub fn with_barrier(omega0: f64, alpha: f64, t: f64, omega_c: f64) -> Self {
        Self {
            omega0,
            alpha,
            t,
            barrier: Barrier::Up(omega_c),
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("t", self.t)?;
        if let Barrier::Up(b) = self.barrier {
            if !b.is_finite() {
                return Err(Error::domain("barrier level must be finite; use Barrier::None"));
            }
            if self.omega0 >= b {
                return Err(Error::domain(format!(
                    "start point {} is not below the barrier {}",
                    self.omega0, b
                )));
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.omega0 + self.alpha * self.t
    }

    /// Integration window `[μ − 12√t, min(ω_c, μ + 12√t)]`.
    pub fn truncation_domain(&self) -> (f64, f64) {
        let mu = self.mean();
        let half = TRUNCATION_SIGMAS * self.t.sqrt();
        let hi = match self.barrier {
            Barrier::None => mu + half,
            Barrier::Up(b) => b.min(mu + half),
        };
        (mu - half, hi)
    }

    /// Drift prefactor `e^{α(ω−ω₀) − α²t/2}` in log form.
    fn ln_drift(&self, omega_n: f64) -> f64 {
        self.alpha * (omega_n - self.omega0) - 0.5 * self.alpha * self.alpha * self.t
    }
}

/// Unabsorbed drifted Gaussian kernel.
pub fn free_density(p: &GaussKernelParams, omega_n: f64) -> Result<f64> {
    ensure_positive("t", p.t)?;
    let d = omega_n - p.omega0;
    let expo = p.ln_drift(omega_n) - d * d / (2.0 * p.t);
    Ok(FRAC_1_SQRT_2PI / p.t.sqrt() * expo.exp())
}

/// Absorbed kernel by the method of images; zero on and above the barrier.
///
/// The image subtraction is evaluated as `e^{-d²/2t}·(1 − e^{−2(ω_c−ωₙ)(ω_c−ω₀)/t})`
/// through `expm1`, so the result keeps full relative precision as ωₙ → ω_c.
pub fn barrier_density_gm(p: &GaussKernelParams, omega_n: f64) -> Result<f64> {
    ensure_positive("t", p.t)?;
    let omega_c = match p.barrier {
        Barrier::None => return free_density(p, omega_n),
        Barrier::Up(b) => b,
    };
    if omega_n >= omega_c {
        return Ok(0.0);
    }
    let d = omega_n - p.omega0;
    let gap = 2.0 * (omega_c - omega_n) * (omega_c - p.omega0) / p.t;
    let expo = p.ln_drift(omega_n) - d * d / (2.0 * p.t);
    Ok(FRAC_1_SQRT_2PI / p.t.sqrt() * expo.exp() * -(-gap).exp_m1())
}

/// Closed-form probability of not having touched the barrier by time t.
pub fn survival_probability(p: &GaussKernelParams) -> Result<f64> {
    p.validate()?;
    let Barrier::Up(omega_c) = p.barrier else {
        return Ok(1.0);
    };
    let b = omega_c - p.omega0;
    let st = p.t.sqrt();
    let at = p.alpha * p.t;
    Ok(norm_cdf((b - at) / st) - (2.0 * p.alpha * b).exp() * norm_cdf((-b - at) / st))
}

/// Which endpoint of `Π_ε` sits on the barrier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HitOrientation {
    /// `Π_ε(ω₀, ω_c)`: start interior at `p.omega0`, end on the barrier.
    EndOnBarrier,
    /// `Π_ε(ω_c, ωₙ)`: start on the barrier, end interior at `omega_ref`.
    StartOnBarrier,
}

/// Coefficient of √ε in the discrete density with one endpoint on the barrier.
///
/// `omega_ref` feeds the drift factor `e^{α(ω_ref − ω_c)}`; with
/// [`HitOrientation::StartOnBarrier`] it is also the interior endpoint.
pub fn hit_density_coeff(
    p: &GaussKernelParams,
    omega_ref: f64,
    orientation: HitOrientation,
) -> Result<f64> {
    ensure_positive("t", p.t)?;
    let Barrier::Up(omega_c) = p.barrier else {
        return Err(Error::domain("hit density needs a finite barrier"));
    };
    let interior = match orientation {
        HitOrientation::EndOnBarrier => p.omega0,
        HitOrientation::StartOnBarrier => omega_ref,
    };
    if interior >= omega_c {
        return Err(Error::domain(format!(
            "interior point {interior} is not below the barrier {omega_c}"
        )));
    }
    let dist = omega_c - interior;
    let shifted = dist - p.alpha * p.t;
    Ok(1.0 / PI.sqrt()
        * (p.alpha * (omega_ref - omega_c)).exp()
        * dist
        / p.t.powf(1.5)
        * (-shifted * shifted / (2.0 * p.t)).exp())
}

/// Coefficient of ε in the discrete density with both endpoints on the barrier.
pub fn corner_density_coeff(t: f64, alpha: f64) -> Result<f64> {
    ensure_positive("t", t)?;
    Ok(FRAC_1_SQRT_2PI * t.powf(-1.5) * (-0.5 * alpha * alpha * t).exp())
}

/// `∫₀^c x^{-3/2}(c−x)^{-3/2} e^{−a²/2x − b²/2(c−x)} dx` in closed form.
pub fn beta_integral(a: f64, b: f64, c: f64) -> Result<f64> {
    ensure_positive("a", a)?;
    ensure_positive("b", b)?;
    ensure_positive("c", c)?;
    Ok((2.0 * PI).sqrt() * (a + b) / (a * b) * c.powf(-1.5) * (-(a + b) * (a + b) / (2.0 * c)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::{integrate, QuadOptions};

    #[test]
    fn free_density_examples() {
        let p = GaussKernelParams::free(0.0, 0.0, 1.0);
        assert!((free_density(&p, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        let p4 = GaussKernelParams::free(0.0, 0.0, 4.0);
        assert!((free_density(&p4, 0.0).unwrap() - 0.199_471_140_200_716_3).abs() < 1e-15);
        let drifted = GaussKernelParams::free(0.0, 0.5, 1.0);
        assert!((free_density(&drifted, 0.5).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
    }

    #[test]
    fn non_positive_time_is_a_domain_error() {
        let p = GaussKernelParams::free(0.0, 0.0, 0.0);
        assert!(matches!(free_density(&p, 0.0), Err(Error::Domain(_))));
        let q = GaussKernelParams::with_barrier(0.0, 0.0, -1.0, 1.0);
        assert!(barrier_density_gm(&q, 0.0).is_err());
    }

    #[test]
    fn barrier_density_examples() {
        let p = GaussKernelParams::with_barrier(0.0, 0.0, 1.0, 1.0);
        assert_eq!(barrier_density_gm(&p, 1.0).unwrap(), 0.0);
        assert_eq!(barrier_density_gm(&p, 1.5).unwrap(), 0.0);
        let expected = FRAC_1_SQRT_2PI * (1.0 - (-2.0f64).exp());
        assert!((barrier_density_gm(&p, 0.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.344_952).abs() < 1e-6);
        let far = GaussKernelParams::with_barrier(0.0, 0.0, 1.0, 50.0);
        assert!((barrier_density_gm(&far, 0.0).unwrap() - FRAC_1_SQRT_2PI).abs() < 1e-12);
    }

    #[test]
    fn barrier_density_vanishes_linearly_at_the_barrier() {
        let p = GaussKernelParams::with_barrier(0.0, 0.2, 1.0, 1.0);
        let slope: Vec<f64> = [1e-4, 1e-6, 1e-8, 1e-10]
            .iter()
            .map(|&h| barrier_density_gm(&p, 1.0 - h).unwrap() / h)
            .collect();
        for w in slope.windows(2) {
            assert!((w[0] / w[1] - 1.0).abs() < 1e-3);
        }
        assert!(slope[3] > 0.0);
    }

    #[test]
    fn hit_and_corner_coefficients() {
        let p = GaussKernelParams::with_barrier(0.0, 0.0, 1.0, 1.0);
        let c = hit_density_coeff(&p, 1.0, HitOrientation::EndOnBarrier).unwrap();
        assert!((c - (-0.5f64).exp() / PI.sqrt()).abs() < 1e-15);
        assert!((c - 0.342_198_280_312_216_5).abs() < 1e-15);
        // α = 0: swapping which endpoint is interior leaves the value unchanged
        let q = GaussKernelParams::with_barrier(0.5, 0.0, 1.0, 1.5);
        let fwd = hit_density_coeff(&q, 1.5, HitOrientation::EndOnBarrier).unwrap();
        let rev = hit_density_coeff(&q, 0.5, HitOrientation::StartOnBarrier).unwrap();
        assert!((fwd - rev).abs() < 1e-15);
        assert!(hit_density_coeff(&p, 2.0, HitOrientation::StartOnBarrier).is_err());

        assert!((corner_density_coeff(1.0, 0.0).unwrap() - 0.398_942_280_401_432_7).abs() < 1e-15);
        assert!((corner_density_coeff(4.0, 0.0).unwrap() - 0.049_867_785_050_179_1).abs() < 1e-15);
    }

    #[test]
    fn beta_integral_examples() {
        let v = beta_integral(1.0, 1.0, 2.0).unwrap();
        assert!((v - PI.sqrt() * (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.652_049).abs() < 1e-6);
        assert!((beta_integral(0.5, 2.0, 1.0).unwrap() - 0.275_333_900_302_546_3).abs() < 1e-15);
        assert_eq!(
            beta_integral(0.7, 1.9, 3.0).unwrap(),
            beta_integral(1.9, 0.7, 3.0).unwrap()
        );
        assert!(beta_integral(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn beta_integral_matches_quadrature_of_the_integrand() {
        for &(a, b, c) in &[(0.2, 0.2, 0.1), (1.0, 1.0, 2.0), (0.5, 2.0, 1.0), (5.0, 0.2, 10.0), (3.0, 4.0, 0.5)] {
            let lhs = integrate(
                |x: f64| {
                    if x <= 0.0 || x >= c {
                        return 0.0;
                    }
                    (x * (c - x)).powf(-1.5) * (-a * a / (2.0 * x) - b * b / (2.0 * (c - x))).exp()
                },
                0.0,
                c,
                QuadOptions {
                    abs_tol: 0.0,
                    rel_tol: 1e-12,
                    max_subdivisions: 4000,
                },
            );
            let rhs = beta_integral(a, b, c).unwrap();
            assert!(((lhs.value - rhs) / rhs).abs() < 1e-8, "a={a} b={b} c={c}");
        }
    }

    #[test]
    fn log_price_round_trip() {
        let coord = LogPriceCoord::new(4.2, 0.17).unwrap();
        assert_eq!(coord.omega(4.2), 0.0);
        for &s in &[0.01, 1.0, 3.9, 4.2, 100.0] {
            assert!((coord.price(coord.omega(s)) / s - 1.0).abs() < 1e-12);
        }
        assert!(coord.omega(5.0) > coord.omega(4.9));
    }
}
