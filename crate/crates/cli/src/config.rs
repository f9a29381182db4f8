use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use pathint::calibration::{FitConfig, SmileInterpolation};
use pathint::expansion::{CoefficientSigns, ExpansionConfig};
use pathint::moving_barrier::{MovingBarrierScheme, StSeries};
use pathint::oracle::McConfig;
use pathint::pricing::{IntegrationMethod, OptionKind, PricingConfig};
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const OUT_DIR_ENV: &str = "PATHINT_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    VanillaCall,
    VanillaPut,
    KuoCall,
    KuoPut,
}

impl From<Kind> for OptionKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::VanillaCall => OptionKind::VanillaCall,
            Kind::VanillaPut => OptionKind::VanillaPut,
            Kind::KuoCall => OptionKind::KuoCall,
            Kind::KuoPut => OptionKind::KuoPut,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    ShethTormen,
    Adiabatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    Analytic,
}

/// Sign convention of the κ₃κ₅ term at order 8.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Signs {
    GenerationRule,
    AsPrinted,
}

/// Barrier series form in the first moving-barrier correction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Series {
    TimePowers,
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Interp {
    Polynomial,
    Spline,
}

/// Every option of every subcommand. The same names, in snake case, are the
/// keys of the flat JSON config file; flags given on the command line win.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Output directory [default: $PATHINT_OUT_DIR, else "."]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,

    /// Smile quotes CSV (date,maturity_months,delta,vol)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smiles: Option<PathBuf>,
    /// Rates CSV (date,maturity_months,r_acc,forward)
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<PathBuf>,
    /// Calibration report to reuse instead of fitting again
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub calibration: Option<PathBuf>,
    /// Quote date (YYYY-MM-DD) to select from the surface
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub date: Option<String>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    /// Drift in ω units; solved from the martingale condition when absent
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Maturity in years
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Accrued rate ∫r dt up to maturity
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_acc: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<f64>,
    /// Discount factor [default: exp(-r_acc)]
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub df: Option<f64>,
    /// Cumulants κ₃, κ₄, ... in ω units, comma separated
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappas: Option<Vec<f64>>,
    /// Overrides the first entry of --kappas
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa3: Option<f64>,
    /// Overrides the second entry of --kappas
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa4: Option<f64>,

    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<Kind>,
    #[arg(long, global = true, visible_alias = "K")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strike: Option<f64>,
    /// Barrier as a price level
    #[arg(long, global = true, visible_alias = "B")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_price: Option<f64>,
    /// Barrier at maturity in ω units, or "none"
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier: Option<String>,
    /// dB/dt at maturity, ω units per year
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_slope: Option<f64>,
    /// d²B/dt² at maturity
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub barrier_curvature: Option<f64>,

    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_lo: Option<f64>,
    #[arg(long, global = true, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_hi: Option<f64>,
    /// Grid points of the density series
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,

    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub signs: Option<Signs>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub st_series: Option<Series>,

    /// Add a Monte Carlo estimate to `price`
    #[arg(long, global = true, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc: Option<bool>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_paths: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_steps: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_seed: Option<u64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_batch: Option<usize>,

    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_order: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ridge_lambda: Option<f64>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub restarts: Option<usize>,
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<u64>,
    #[arg(long, global = true, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<Interp>,
    /// Strikes per slice in the calibration price regression; 0 skips it
    #[arg(long, global = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regression_strikes: Option<usize>,

    /// Barrier multipliers Θ, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thetas: Option<Vec<f64>>,

    /// Criterion ids for `validate`, comma separated
    #[arg(long, global = true, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub only: Option<Vec<u8>>,
}

impl RunConfig {
    /// File values overlaid by the command-line values that were given.
    pub fn merged(file: Option<&Path>, cli: &RunConfig) -> Result<RunConfig> {
        let mut base = match file {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                let value: Value =
                    serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
                if !value.is_object() {
                    bail!("config {} must be a flat JSON object", path.display());
                }
                value
            }
            None => Value::Object(Default::default()),
        };
        let overrides = serde_json::to_value(cli)?;
        let (Value::Object(dst), Value::Object(src)) = (&mut base, overrides) else {
            unreachable!("both sides are objects");
        };
        dst.extend(src);
        serde_json::from_value(base).context("invalid config")
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn expansion(&self) -> ExpansionConfig {
        ExpansionConfig {
            signs: match self.signs {
                Some(Signs::AsPrinted) => CoefficientSigns::AsPrinted,
                _ => CoefficientSigns::GenerationRule,
            },
            st_series: match self.st_series {
                Some(Series::AsPrinted) => StSeries::AsPrinted,
                _ => StSeries::TimePowers,
            },
        }
    }

    pub fn scheme(&self) -> MovingBarrierScheme {
        match self.scheme {
            Some(Scheme::Adiabatic) => MovingBarrierScheme::Adiabatic,
            _ => MovingBarrierScheme::ShethTormen,
        }
    }

    pub fn pricing(&self) -> Result<PricingConfig> {
        let d = PricingConfig::default();
        let cfg = PricingConfig {
            method: match self.method {
                Some(Method::Analytic) => IntegrationMethod::Analytic,
                _ => IntegrationMethod::Quadrature,
            },
            scheme: self.scheme(),
            expansion: self.expansion(),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            solve_drift: self.alpha.is_none(),
        };
        if !(cfg.abs_tol > 0.0 && cfg.rel_tol > 0.0) {
            bail!("abs_tol and rel_tol must be positive");
        }
        Ok(cfg)
    }

    pub fn mc_config(&self) -> Result<McConfig> {
        let d = McConfig::default();
        let cfg = McConfig {
            n_paths: self.mc_paths.unwrap_or(d.n_paths),
            n_steps: self.mc_steps.unwrap_or(d.n_steps),
            seed: self.mc_seed.unwrap_or(d.seed),
            batch_size: self.mc_batch.unwrap_or(d.batch_size),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn fit_config(&self) -> Result<FitConfig> {
        let d = FitConfig::default();
        let cfg = FitConfig {
            max_order: self.max_order.unwrap_or(d.max_order),
            ridge_lambda: self.ridge_lambda.unwrap_or(d.ridge_lambda),
            restarts: self.restarts.unwrap_or(d.restarts),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            interpolation: match self.interpolation {
                Some(Interp::Spline) => SmileInterpolation::NotAKnotSpline,
                _ => SmileInterpolation::Polynomial,
            },
            expansion: self.expansion(),
            ..d
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// κ₃, κ₄, ... with the single-cumulant flags applied.
    pub fn kappas(&self) -> Vec<f64> {
        let mut k = self.kappas.clone().unwrap_or_default();
        for (i, v) in [(0, self.kappa3), (1, self.kappa4)] {
            if let Some(v) = v {
                if k.len() <= i {
                    k.resize(i + 1, 0.0);
                }
                k[i] = v;
            }
        }
        k
    }

    pub fn require<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
        value.with_context(|| format!("missing required option --{}", name.replace('_', "-")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cli_values_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"sigma": 0.3, "t": 2.0, "kappas": [0.01]}"#).unwrap();
        let cli = RunConfig {
            sigma: Some(0.2),
            ..Default::default()
        };
        let cfg = RunConfig::merged(Some(&path), &cli).unwrap();
        assert_eq!(cfg.sigma, Some(0.2));
        assert_eq!(cfg.t, Some(2.0));
        assert_eq!(cfg.kappas(), vec![0.01]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.json");
        std::fs::write(&path, r#"{"sigmaa": 0.3}"#).unwrap();
        assert!(RunConfig::merged(Some(&path), &RunConfig::default()).is_err());
    }

    #[test]
    fn single_kappa_flags_extend_the_list() {
        let cfg = RunConfig {
            kappa4: Some(0.02),
            ..Default::default()
        };
        assert_eq!(cfg.kappas(), vec![0.0, 0.02]);
    }
}
