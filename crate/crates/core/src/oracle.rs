//! Independent reference computations: discrete path sums, a grid
//! transfer operator, Monte Carlo with Brownian-bridge monitoring, and the
//! exact density for a linearly moving barrier.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_positive, Error, Result};
use crate::expansion::{vanilla_terms, CumulantSet};
use crate::kernels::{barrier_density_gm, free_density, Barrier, GaussKernelParams};
use crate::martingale::solve_drift_with;
use crate::moving_barrier::BarrierPath;
use crate::pricing::{OptionKind, OptionSpec, PricingConfig};
use crate::quadrature::{integrate, QuadOptions};
use crate::special::{erfc, norm_cdf, FRAC_1_SQRT_2PI};

/// One-step kernel `Ψ_ε(Δω)` with mean `αε`.
fn step_kernel(delta: f64, alpha: f64, eps: f64) -> f64 {
    let d = delta - alpha * eps;
    FRAC_1_SQRT_2PI / eps.sqrt() * (-d * d / (2.0 * eps)).exp()
}

/// `∫_{−∞}^{c} Ψ_ε(x − a) Ψ_ε(b − x) dx` in closed form.
fn two_step(a: f64, b: f64, c: f64, alpha: f64, eps: f64) -> f64 {
    let d = b - a - 2.0 * alpha * eps;
    let mid = 0.5 * (a + b);
    if c == f64::INFINITY {
        return FRAC_1_SQRT_2PI / (2.0 * eps).sqrt() * (-d * d / (4.0 * eps)).exp();
    }
    0.25 / (std::f64::consts::PI * eps).sqrt() * (-d * d / (4.0 * eps)).exp() * erfc((mid - c) / eps.sqrt())
}

/// Discrete path sum with `n_steps` equal steps and the barrier checked at
/// each intermediate time.
///
/// `barrier_at(t)` gives the barrier level at time t; `f64::INFINITY` means
/// no barrier. The innermost integral is done in closed form, the rest by
/// nested adaptive quadrature.
pub fn brute_force_path_density_with<F>(
    omega0: f64,
    alpha: f64,
    t: f64,
    n_steps: usize,
    barrier_at: F,
    omega_n: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    ensure_positive("t", t)?;
    if !(1..=4).contains(&n_steps) {
        return Err(Error::domain(format!("n_steps must be in 1..=4, got {n_steps}")));
    }
    let eps = t / n_steps as f64;
    let levels: Vec<f64> = (1..n_steps).map(|i| barrier_at(i as f64 * eps)).collect();
    Ok(nested(omega0, omega_n, alpha, eps, &levels, 1e-8))
}

/// Density at `ω_n` of paths from `start` whose intermediate points stay below `levels`.
fn nested(start: f64, end: f64, alpha: f64, eps: f64, levels: &[f64], tol: f64) -> f64 {
    match levels.len() {
        0 => step_kernel(end - start, alpha, eps),
        1 => two_step(start, end, levels[0], alpha, eps),
        _ => {
            let c = levels[0];
            let half = 10.0 * eps.sqrt();
            let lo = start + alpha * eps - half;
            let hi = c.min(start + alpha * eps + half);
            if hi <= lo {
                return 0.0;
            }
            let opts = QuadOptions {
                abs_tol: tol,
                rel_tol: tol,
                max_subdivisions: 200,
            };
            integrate(
                |x| step_kernel(x - start, alpha, eps) * nested(x, end, alpha, eps, &levels[1..], tol),
                lo,
                hi,
                opts,
            )
            .value
        }
    }
}

/// Discrete path sum for a constant (or absent) barrier.
pub fn brute_force_path_density(p: &GaussKernelParams, n_steps: usize, omega_n: f64) -> Result<f64> {
    p.validate()?;
    let level = p.barrier.level().unwrap_or(f64::INFINITY);
    brute_force_path_density_with(p.omega0, p.alpha, p.t, n_steps, |_| level, omega_n)
}

/// Discrete path density for many steps by iterating the one-step kernel on
/// a uniform grid (trapezoid rule, kernel truncated at 10√ε).
///
/// For a constant barrier the grid is aligned so the barrier is a node.
pub fn grid_path_density<F>(
    omega0: f64,
    alpha: f64,
    t: f64,
    n_steps: usize,
    barrier_at: F,
    h: f64,
    omega_n: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    ensure_positive("t", t)?;
    ensure_positive("h", h)?;
    if n_steps < 2 {
        return Err(Error::domain("grid density needs at least two steps"));
    }
    let eps = t / n_steps as f64;
    let reach = 10.0 * t.sqrt();
    let top = (1..n_steps)
        .map(|i| barrier_at(i as f64 * eps))
        .fold(f64::NEG_INFINITY, f64::max)
        .min(omega0 + alpha * t + reach);
    let lo_target = omega0 + alpha * t.min(0.0) - reach;
    let m = ((top - lo_target) / h).ceil() as usize;
    let xs: Vec<f64> = (0..=m).map(|j| top - (m - j) as f64 * h).collect();
    let band = (10.0 * eps.sqrt() / h).ceil() as isize;

    let mask = |f: &mut [f64], level: f64| {
        for (v, &x) in f.iter_mut().zip(&xs) {
            if x > level + 1e-12 * h {
                *v = 0.0;
            }
        }
    };
    // trapezoid weights: half weight at the outer node and at the last node below the barrier
    let weights = |f: &[f64], level: f64| -> Vec<f64> {
        let mut w: Vec<f64> = f.iter().map(|v| v * h).collect();
        w[0] *= 0.5;
        if let Some(last) = xs.iter().rposition(|&x| x <= level + 1e-12 * h) {
            if (xs[last] - level).abs() <= 1e-12 * h.max(level.abs()) {
                w[last] *= 0.5;
            }
        }
        w
    };

    let mut f: Vec<f64> = xs.iter().map(|&x| step_kernel(x - omega0, alpha, eps)).collect();
    let level1 = barrier_at(eps);
    mask(&mut f, level1);
    let mut level = level1;
    for i in 2..n_steps {
        let w = weights(&f, level);
        let kern: Vec<f64> = (-band..=band).map(|d| step_kernel(d as f64 * h, alpha, eps)).collect();
        let next_level = barrier_at(i as f64 * eps);
        let n = xs.len() as isize;
        let mut g: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|k| {
                if xs[k as usize] > next_level + 1e-12 * h {
                    return 0.0;
                }
                let (a, b) = ((k - band).max(0), (k + band).min(n - 1));
                (a..=b).map(|j| w[j as usize] * kern[(k - j + band) as usize]).sum()
            })
            .collect();
        mask(&mut g, next_level);
        f = g;
        level = next_level;
    }
    let w = weights(&f, level);
    Ok(xs.iter().zip(&w).map(|(&x, &wj)| wj * step_kernel(omega_n - x, alpha, eps)).sum())
}

/// Continuous-monitoring density for `B(t) = b0 + ξt`.
///
/// `Y = ω − ξt` has drift `α − ξ` and the fixed barrier `b0`, so the density
/// is the absorbed kernel of Y evaluated at `ωₙ − ξt`.
pub fn exact_linear_barrier_density(p: &GaussKernelParams, b0: f64, xi: f64, omega_n: f64) -> Result<f64> {
    let shifted = GaussKernelParams::with_barrier(p.omega0, p.alpha - xi, p.t, b0);
    barrier_density_gm(&shifted, omega_n - xi * p.t)
}

/// `∫_{−∞}^{x} Π^gm dω` for a constant barrier (free kernel if none).
pub fn absorbed_mass_below(p: &GaussKernelParams, x: f64) -> Result<f64> {
    p.validate()?;
    let sd = p.t.sqrt();
    let mu = p.mean();
    match p.barrier {
        Barrier::None => Ok(norm_cdf((x - mu) / sd)),
        Barrier::Up(b) => {
            let x = x.min(b);
            let image = 2.0 * b - p.omega0 + p.alpha * p.t;
            Ok(norm_cdf((x - mu) / sd) - (2.0 * p.alpha * (b - p.omega0)).exp() * norm_cdf((x - image) / sd))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct McConfig {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            n_paths: 1_000_000,
            n_steps: 64,
            seed: 20_240_601,
            batch_size: 16_384,
        }
    }
}

impl McConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 2 || self.n_steps == 0 || self.batch_size == 0 {
            return Err(Error::domain("MC config needs n_paths ≥ 2 and positive n_steps, batch_size"));
        }
        Ok(())
    }

    fn batches(&self) -> Vec<(u64, usize)> {
        let n = self.n_paths.div_ceil(self.batch_size);
        (0..n)
            .map(|i| (i as u64, self.batch_size.min(self.n_paths - i * self.batch_size)))
            .collect()
    }

    /// Stream `batch` of the seeded generator.
    fn rng(&self, batch: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(batch);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McResult {
    pub price: f64,
    pub standard_error: f64,
    pub n_paths: usize,
}

#[derive(Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sum_sq: f64,
    count: usize,
}

/// Monte Carlo price with per-step Brownian-bridge survival weights.
///
/// Paths use exact Gaussian increments with the martingale drift. For a
/// non-Gaussian set the endpoint is reweighted by `Π^inf/G`, keeping the
/// Gaussian bridge between monitoring dates; this is an approximation
/// suited to sanity bands only.
pub fn mc_kuo_price(spec: &OptionSpec, c: &CumulantSet, cfg: &McConfig, pcfg: &PricingConfig) -> Result<McResult> {
    spec.validate()?;
    cfg.validate()?;
    let alpha = if pcfg.solve_drift {
        solve_drift_with(c, &spec.rates, pcfg.expansion)?.alpha
    } else {
        c.alpha
    };
    let sigma = spec.rates.sigma;
    let t = spec.t;
    let reweight = if c.is_gaussian() {
        None
    } else {
        Some(vanilla_terms(&c.with_alpha(alpha), pcfg.expansion)?)
    };
    let proposal = GaussKernelParams::free(0.0, alpha, t);
    let barrier: Option<&BarrierPath> = match spec.kind {
        OptionKind::KuoCall | OptionKind::KuoPut => spec.barrier.as_ref(),
        _ => None,
    };
    let call = matches!(spec.kind, OptionKind::VanillaCall | OptionKind::KuoCall);
    let eps = t / cfg.n_steps as f64;
    let sqrt_eps = eps.sqrt();
    let levels: Vec<f64> = (0..=cfg.n_steps)
        .map(|i| barrier.map_or(f64::INFINITY, |b| b.level_at(i as f64 * eps, t)))
        .collect();

    let parts: Vec<Moments> = cfg
        .batches()
        .into_par_iter()
        .map(|(batch, n)| {
            let mut rng = cfg.rng(batch);
            let mut m = Moments::default();
            for _ in 0..n {
                let mut w = 0.0;
                let mut survive = 1.0;
                for i in 0..cfg.n_steps {
                    let z: f64 = rng.sample(StandardNormal);
                    let next = w + alpha * eps + sqrt_eps * z;
                    if survive > 0.0 && levels[i + 1].is_finite() {
                        let (g0, g1) = (levels[i] - w, levels[i + 1] - next);
                        survive *= if g0 > 0.0 && g1 > 0.0 {
                            -(-2.0 * g0 * g1 / eps).exp_m1()
                        } else {
                            0.0
                        };
                    }
                    w = next;
                }
                let s = spec.s0 * (sigma * w).exp();
                let mut payoff = survive * if call { (s - spec.strike).max(0.0) } else { (spec.strike - s).max(0.0) };
                if let Some(terms) = &reweight {
                    if payoff != 0.0 {
                        let g = free_density(&proposal, w).unwrap_or(0.0);
                        payoff *= if g > 0.0 { terms.evaluate(w, 0.0) / g } else { 0.0 };
                    }
                }
                m.sum += payoff;
                m.sum_sq += payoff * payoff;
                m.count += 1;
            }
            m
        })
        .collect();
    let total = parts.iter().fold(Moments::default(), |a, b| Moments {
        sum: a.sum + b.sum,
        sum_sq: a.sum_sq + b.sum_sq,
        count: a.count + b.count,
    });
    let n = total.count as f64;
    let mean = total.sum / n;
    let var = (total.sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(McResult {
        price: spec.df * mean,
        standard_error: spec.df * (var / n).sqrt(),
        n_paths: total.count,
    })
}

/// Endpoints of surviving paths, with knock-out sampled from the bridge
/// crossing probability at each step.
pub fn mc_absorbed_endpoints(p: &GaussKernelParams, cfg: &McConfig) -> Result<Vec<f64>> {
    p.validate()?;
    cfg.validate()?;
    let level = p.barrier.level().unwrap_or(f64::INFINITY);
    let eps = p.t / cfg.n_steps as f64;
    let sqrt_eps = eps.sqrt();
    let parts: Vec<Vec<f64>> = cfg
        .batches()
        .into_par_iter()
        .map(|(batch, n)| {
            let mut rng = cfg.rng(batch);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let mut w = p.omega0;
                let mut alive = true;
                for _ in 0..cfg.n_steps {
                    let z: f64 = rng.sample(StandardNormal);
                    let next = w + p.alpha * eps + sqrt_eps * z;
                    if alive && level.is_finite() {
                        let (g0, g1) = (level - w, level - next);
                        let u: f64 = rng.random();
                        alive = g1 > 0.0 && u >= (-2.0 * g0 * g1 / eps).exp();
                    }
                    w = next;
                }
                if alive {
                    out.push(w);
                }
            }
            out
        })
        .collect();
    Ok(parts.concat())
}

/// Kolmogorov–Smirnov distance between the binned empirical CDF of
/// `samples` and `cdf`, evaluated at the `bins + 1` edges of `[lo, hi]`.
pub fn ks_statistic_binned<F: Fn(f64) -> f64>(samples: &[f64], cdf: F, lo: f64, hi: f64, bins: usize) -> Result<f64> {
    if samples.is_empty() || bins == 0 || hi <= lo {
        return Err(Error::domain("KS needs samples, bins and a nonempty range"));
    }
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins + 2];
    for &x in samples {
        let idx = if x < lo {
            0
        } else if x >= hi {
            bins + 1
        } else {
            1 + ((x - lo) / width) as usize
        };
        counts[idx.min(bins)] += 1;
    }
    let n = samples.len() as f64;
    let mut cum = counts[0] as f64;
    let mut d = (cum / n - cdf(lo)).abs();
    for (k, &c) in counts[1..=bins].iter().enumerate() {
        cum += c as f64;
        let edge = lo + (k + 1) as f64 * width;
        d = d.max((cum / n - cdf(edge)).abs());
    }
    Ok(d)
}
