use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use pathint::calibration::{
    fit::REPORT_SCHEMA_VERSION, fit_surface, io, price_regression, CalibrationReport, SmileSlice,
};
use pathint::expansion::{density_barrier_with, vanilla_window, CumulantSet};
use pathint::martingale::{drift_closed_form_k15, solve_drift_with, RateSpec};
use pathint::moving_barrier::BarrierPath;
use pathint::oracle::{mc_kuo_price, McResult};
use pathint::pricing::{
    barrier_grid_experiment, ExperimentSlice, OptionKind, OptionSpec, PricingConfig, PricingResult,
    EXPERIMENT_CSV_HEADER,
};
use pathint::validation::{run_criterion, CriterionOutcome, CRITERIA};
use serde::Serialize;

use crate::config::RunConfig;
use crate::fmt::g12;

pub const SCHEMA_VERSION: u32 = 1;

const DEFAULT_POINTS: usize = 1201;
const DEFAULT_THETAS: [f64; 4] = [1.1, 1.2, 1.3, 1.5];
const DEFAULT_REGRESSION_STRIKES: usize = 25;

fn req<T: Copy>(value: Option<T>, name: &str) -> Result<T> {
    RunConfig::require(value, name)
}

/// Creates the output directory and writes the effective config there.
fn prepare_out(cfg: &RunConfig, command: &str) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    write_artifact(&dir, &format!("{command}_config.json"), serde_json::to_string_pretty(cfg)? + "\n")?;
    Ok(dir)
}

fn write_artifact(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<PathBuf> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn cumulants(cfg: &RunConfig) -> Result<CumulantSet> {
    let sigma = req(cfg.sigma, "sigma")?;
    let t = req(cfg.t, "t")?;
    Ok(CumulantSet::new(sigma, cfg.alpha.unwrap_or(0.0), t, cfg.kappas())?)
}

/// ω-unit barrier path from `--barrier`, `--barrier-slope` and `--barrier-curvature`.
fn omega_barrier(cfg: &RunConfig, t: f64) -> Result<Option<BarrierPath>> {
    let level = match cfg.barrier.as_deref().map(str::trim) {
        None | Some("none") => {
            ensure!(
                cfg.barrier_slope.is_none() && cfg.barrier_curvature.is_none(),
                "barrier slope or curvature given without a barrier"
            );
            return Ok(None);
        }
        Some(s) => s.parse::<f64>().with_context(|| format!("barrier must be a number or \"none\", got {s:?}"))?,
    };
    let path = moving_path(level, cfg);
    path.validate(0.0, t)?;
    Ok(Some(path))
}

fn moving_path(level: f64, cfg: &RunConfig) -> BarrierPath {
    match (cfg.barrier_slope, cfg.barrier_curvature) {
        (None, None) => BarrierPath::constant(level),
        (slope, curvature) => BarrierPath::polynomial(level, vec![slope.unwrap_or(0.0), curvature.unwrap_or(0.0)]),
    }
}

pub fn density(cfg: &RunConfig, command: &str) -> Result<bool> {
    let mut c = cumulants(cfg)?;
    let barrier = omega_barrier(cfg, c.t_n)?;
    let expansion = cfg.expansion();
    let rates = match (cfg.alpha, cfg.r_acc) {
        (None, Some(r)) => Some(RateSpec::new(r, c.t_n, c.sigma)?),
        _ => None,
    };
    let points = cfg.points.unwrap_or(DEFAULT_POINTS);
    ensure!(points >= 2, "points must be at least 2");
    let dir = prepare_out(cfg, command)?;

    if let Some(rates) = &rates {
        c.alpha = solve_drift_with(&c, rates, expansion)?.alpha;
    }
    let (w_lo, w_hi) = vanilla_window(&c);
    let lo = cfg.omega_lo.unwrap_or(w_lo);
    let hi = cfg.omega_hi.unwrap_or(w_hi);
    ensure!(lo < hi && lo.is_finite() && hi.is_finite(), "omega range [{lo}, {hi}] is empty");
    let h = (hi - lo) / (points - 1) as f64;
    let mut out = String::from("omega,density\n");
    for i in 0..points {
        let w = if i + 1 == points { hi } else { lo + i as f64 * h };
        let p = density_barrier_with(&c, barrier.as_ref(), cfg.scheme(), expansion, w)?;
        writeln!(out, "{},{}", g12(w), g12(p))?;
    }
    write_artifact(&dir, "density.csv", out)?;
    Ok(true)
}

pub fn drift(cfg: &RunConfig, command: &str) -> Result<bool> {
    let c = cumulants(cfg)?;
    let rates = RateSpec::new(req(cfg.r_acc, "r_acc")?, c.t_n, c.sigma)?;
    ensure!(cfg.alpha.is_none(), "drift solves for alpha; do not pass --alpha");
    prepare_out(cfg, command)?;
    let solved = solve_drift_with(&c, &rates, cfg.expansion())?;
    let closed = drift_closed_form_k15(&c, &rates)?;
    println!("alpha_solved,alpha_closed_form,residual");
    println!("{},{},{}", g12(solved.alpha), g12(closed), g12(solved.residual));
    Ok(true)
}

#[derive(Serialize)]
struct PriceReport<'a> {
    schema_version: u32,
    spec: &'a OptionSpec,
    cumulants: &'a CumulantSet,
    config: &'a PricingConfig,
    result: PricingResult,
    monte_carlo: Option<McResult>,
}

pub fn price(cfg: &RunConfig, command: &str) -> Result<bool> {
    let c = cumulants(cfg)?;
    let kind: OptionKind = req(cfg.kind, "kind")?.into();
    let r_acc = cfg.r_acc.unwrap_or(0.0);
    let mut spec = OptionSpec {
        kind,
        s0: cfg.s0.unwrap_or(1.0),
        strike: req(cfg.strike, "strike")?,
        t: c.t_n,
        barrier: None,
        rates: RateSpec::new(r_acc, c.t_n, c.sigma)?,
        df: cfg.df.unwrap_or((-r_acc).exp()),
    };
    match (cfg.barrier_price, kind) {
        (Some(b), OptionKind::KuoCall | OptionKind::KuoPut) => {
            ensure!(cfg.barrier.is_none(), "give the barrier either as a price or in ω units, not both");
            ensure!(b > 0.0, "barrier price must be positive");
            spec.barrier = Some(moving_path(spec.coord().omega(b), cfg));
        }
        (None, OptionKind::KuoCall | OptionKind::KuoPut) => spec.barrier = omega_barrier(cfg, c.t_n)?,
        (Some(_), _) => bail!("a barrier only applies to kuo-call and kuo-put"),
        (None, _) => {}
    }
    spec.validate()?;
    let pcfg = cfg.pricing()?;
    let mc_cfg = cfg.mc.unwrap_or(false).then(|| cfg.mc_config()).transpose()?;
    if mc_cfg.is_some() {
        ensure!(
            matches!(kind, OptionKind::KuoCall | OptionKind::KuoPut),
            "the Monte Carlo estimate covers knock-out kinds only"
        );
    }
    let dir = prepare_out(cfg, command)?;

    let result = pathint::pricing::price(&spec, &c, &pcfg)?;
    let monte_carlo = mc_cfg.map(|m| mc_kuo_price(&spec, &c, &m, &pcfg)).transpose()?;
    let report = PriceReport {
        schema_version: SCHEMA_VERSION,
        spec: &spec,
        cumulants: &c,
        config: &pcfg,
        result,
        monte_carlo,
    };
    write_artifact(&dir, "price.json", serde_json::to_string_pretty(&report)? + "\n")?;
    print!("price,alpha,negative_mass");
    if report.monte_carlo.is_some() {
        print!(",mc_price,mc_standard_error");
    }
    println!();
    let d = &report.result.diagnostics;
    print!("{},{},{}", g12(report.result.price), g12(d.alpha), g12(d.negative_mass));
    if let Some(m) = &report.monte_carlo {
        print!(",{},{}", g12(m.price), g12(m.standard_error));
    }
    println!();
    Ok(true)
}

fn load_slices(cfg: &RunConfig) -> Result<Vec<SmileSlice>> {
    let smiles = cfg.smiles.as_deref().context("missing required option --smiles")?;
    let rates = cfg.rates.as_deref().context("missing required option --rates")?;
    let surface = io::load_surface(smiles, rates).with_context(|| format!("loading {} and {}", smiles.display(), rates.display()))?;
    let slices = surface.slices()?;
    ensure!(!slices.is_empty(), "no smiles in {}", smiles.display());
    match &cfg.date {
        None => Ok(slices),
        Some(d) => {
            let picked: Vec<SmileSlice> = slices.iter().filter(|s| s.date.to_string() == *d).cloned().collect();
            ensure!(!picked.is_empty(), "no smiles dated {d}");
            Ok(picked)
        }
    }
}

pub fn calibrate(cfg: &RunConfig, command: &str) -> Result<bool> {
    let fit_cfg = cfg.fit_config()?;
    let slices = load_slices(cfg)?;
    let per_slice = cfg.regression_strikes.unwrap_or(DEFAULT_REGRESSION_STRIKES);
    ensure!(per_slice != 1, "regression_strikes must be 0 or at least 2");
    let dir = prepare_out(cfg, command)?;

    let mut report = fit_surface(&slices, &fit_cfg)?;
    if per_slice > 0 && !report.slices.is_empty() {
        report.regression = Some(price_regression(&slices, &report, per_slice)?);
    }
    write_artifact(&dir, "calibration.json", serde_json::to_string_pretty(&report)? + "\n")?;
    let mut summary = Vec::new();
    io::write_summary(&mut summary, &report, g12)?;
    write_artifact(&dir, "calibration_summary.csv", summary)?;
    for f in &report.failures {
        eprintln!("warning: {} / {}m not fitted: {}", f.date, f.maturity_months, f.message);
    }
    if let Some(r) = &report.regression {
        println!("a_p,b_p,r2,n");
        println!("{},{},{},{}", g12(r.a_p), g12(r.b_p), g12(r.r2), r.n);
    }
    Ok(true)
}

fn read_report(path: &Path) -> Result<CalibrationReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let report: CalibrationReport =
        serde_json::from_str(&text).with_context(|| format!("parsing calibration report {}", path.display()))?;
    ensure!(
        report.schema_version == REPORT_SCHEMA_VERSION,
        "calibration report schema {} is not the supported {}",
        report.schema_version,
        REPORT_SCHEMA_VERSION
    );
    Ok(report)
}

pub fn experiment(cfg: &RunConfig, command: &str) -> Result<bool> {
    let slices = load_slices(cfg)?;
    let dates: std::collections::BTreeSet<String> = slices.iter().map(|s| s.date.to_string()).collect();
    ensure!(
        dates.len() == 1,
        "the surface holds several dates ({}); pick one with --date",
        dates.into_iter().collect::<Vec<_>>().join(", ")
    );
    let thetas = cfg.thetas.clone().unwrap_or(DEFAULT_THETAS.to_vec());
    ensure!(
        !thetas.is_empty() && thetas.iter().all(|&th| th > 0.0 && th.is_finite()),
        "thetas must be positive"
    );
    let fit_cfg = cfg.fit_config()?;
    let pcfg = PricingConfig {
        solve_drift: false,
        ..cfg.pricing()?
    };
    let stored = cfg.calibration.as_deref().map(read_report).transpose()?;
    let dir = prepare_out(cfg, command)?;

    let report = match stored {
        Some(r) => r,
        None => fit_surface(&slices, &fit_cfg)?,
    };
    let mut out = format!("{EXPERIMENT_CSV_HEADER}\n");
    let opt = |v: Option<f64>| v.map_or_else(|| "gap".to_string(), g12);
    for s in &slices {
        let strikes = s.strikes()?;
        let curve = s.curve(report.config.interpolation)?;
        let slice = ExperimentSlice {
            maturity_months: s.maturity_months,
            params: report.fit_for(s.date, s.maturity_months).map(|f| f.params.clone()),
            forward: s.forward,
            r_acc: s.r_acc,
            df: (-s.r_acc).exp(),
            bs_vols: Some(strikes.iter().map(|&k| curve.vol(k)).collect()),
            strikes,
        };
        if slice.params.is_none() {
            eprintln!("warning: no calibration for {} / {}m; its rows are gaps", s.date, s.maturity_months);
        }
        for row in barrier_grid_experiment(s.s0(), &[slice], &thetas, &pcfg)? {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                g12(row.strike),
                row.maturity_months,
                g12(row.theta),
                g12(row.barrier),
                opt(row.price_pi),
                opt(row.price_bs),
                opt(row.neg_mass)
            )?;
        }
    }
    write_artifact(&dir, "experiment.csv", out)?;
    Ok(true)
}

#[derive(Serialize)]
struct ValidationReport {
    schema_version: u32,
    passed: bool,
    criteria: Vec<CriterionOutcome>,
}

pub fn validate(cfg: &RunConfig, command: &str) -> Result<bool> {
    let ids: Vec<u8> = match &cfg.only {
        Some(ids) => ids.clone(),
        None => CRITERIA.iter().map(|&(id, _)| id).collect(),
    };
    for id in &ids {
        ensure!(CRITERIA.iter().any(|&(c, _)| c == *id), "unknown criterion {id}");
    }
    let dir = prepare_out(cfg, command)?;
    let mut criteria = Vec::new();
    for id in ids {
        let outcome = run_criterion(id).expect("criterion id checked above");
        println!("{}", outcome.line());
        criteria.push(outcome);
    }
    let passed = criteria.iter().all(|c| c.passed);
    let report = ValidationReport {
        schema_version: SCHEMA_VERSION,
        passed,
        criteria,
    };
    write_artifact(&dir, "validation.json", serde_json::to_string_pretty(&report)? + "\n")?;
    Ok(passed)
}
