use std::path::Path;
use std::process::{Command, Output};

use chrono::NaiveDate;
use pathint::calibration::io::{write_rates, write_smiles};
use pathint::calibration::synthetic::synthetic_surface;
use pathint::expansion::CumulantSet;

fn pathint(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pathint"))
        .args(args)
        .env("PATHINT_OUT_DIR", dir)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_surface(dir: &Path, months: &[u32]) {
    let date = NaiveDate::from_ymd_opt(2013, 5, 2).unwrap();
    let sets: Vec<(u32, CumulantSet)> = months
        .iter()
        .map(|&m| {
            let t = m as f64 / 12.0;
            (m, CumulantSet::new(0.15, 0.0, t, vec![-0.06 * t, 0.04 * t, 0.0, 0.0, 0.0]).unwrap())
        })
        .collect();
    let surface = synthetic_surface(&sets, date, 2.0, 0.08).unwrap();
    write_smiles(std::fs::File::create(dir.join("smiles.csv")).unwrap(), &surface.quotes).unwrap();
    write_rates(std::fs::File::create(dir.join("rates.csv")).unwrap(), &surface.rates).unwrap();
}

#[test]
fn drift_prints_solution_and_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathint(dir.path(), &["drift", "--sigma", "0.2", "--t", "1", "--r-acc", "0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(&row[..2], ["0.15", "0.15"]);
    assert!(dir.path().join("drift_config.json").exists());
}

#[test]
fn vanilla_density_integrates_to_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathint(
        dir.path(),
        &["density", "--kappa3", "0", "--barrier", "none", "--sigma", "0.2", "--t", "1", "--r-acc", "0.05"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("omega,density"));
    let pts: Vec<(f64, f64)> = lines
        .map(|l| {
            let (w, p) = l.split_once(',').unwrap();
            (w.parse().unwrap(), p.parse().unwrap())
        })
        .collect();
    let mass: f64 = pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum();
    assert!((mass - 1.0).abs() < 1e-8, "mass {mass}");
}

#[test]
fn absorbed_density_vanishes_above_the_barrier() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathint(
        dir.path(),
        &["density", "--sigma", "0.2", "--t", "1", "--kappas", "-0.02,0.01", "--barrier", "1.5", "--barrier-slope", "0.1"],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("density.csv")).unwrap();
    for l in text.lines().skip(1) {
        let (w, p) = l.split_once(',').unwrap();
        if w.parse::<f64>().unwrap() >= 1.5 {
            assert_eq!(p, "0");
        }
    }
}

#[test]
fn knock_out_call_with_strike_above_barrier_is_worthless() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathint(dir.path(), &["price", "--kind", "kuo-call", "--K", "1.2", "--B", "1.1", "--sigma", "0.2", "--t", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("0,"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("price.json")).unwrap()).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["result"]["price"], 0.0);
}

#[test]
fn emitted_config_reproduces_the_run() {
    let first = tempfile::tempdir().unwrap();
    let args = [
        "price", "--kind", "kuo-call", "--K", "1.0", "--B", "1.3", "--sigma", "0.2", "--t", "0.5", "--r-acc", "0.02",
        "--kappas", "-0.02,0.01", "--mc", "--mc-paths", "20000",
    ];
    let o = pathint(first.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let cfg = first.path().join("price_config.json");
    let second = tempfile::tempdir().unwrap();
    let again = pathint(
        second.path(),
        &["price", "--config", cfg.to_str().unwrap(), "--out-dir", second.path().to_str().unwrap()],
    );
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(stdout(&o), stdout(&again));
    let a = std::fs::read(first.path().join("price.json")).unwrap();
    let b = std::fs::read(second.path().join("price.json")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn command_line_overrides_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"sigma": 0.2, "t": 1.0, "r_acc": 0.01}"#).unwrap();
    let o = pathint(dir.path(), &["drift", "--config", cfg.to_str().unwrap(), "--r-acc", "0.05"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).lines().nth(1).unwrap().starts_with("0.15,0.15,"));
}

#[test]
fn inconsistent_config_fails_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathint(dir.path(), &["price", "--kind", "kuo-call", "--K", "1.0", "--sigma", "0.2", "--t", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("barrier"), "{}", stderr(&o));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());

    let o = pathint(dir.path(), &["drift", "--t", "1", "--r-acc", "0.05"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--sigma"));
}

#[test]
fn malformed_csv_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    write_surface(dir.path(), &[3]);
    let smiles = dir.path().join("smiles.csv");
    let mut text = std::fs::read_to_string(&smiles).unwrap();
    text.push_str("2013-05-02,6,0.25,not-a-vol\n");
    std::fs::write(&smiles, text).unwrap();
    let o = pathint(
        dir.path(),
        &["calibrate", "--smiles", smiles.to_str().unwrap(), "--rates", dir.path().join("rates.csv").to_str().unwrap()],
    );
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 7"), "{}", stderr(&o));
}

#[test]
fn calibrate_then_experiment() {
    let dir = tempfile::tempdir().unwrap();
    write_surface(dir.path(), &[6, 12]);
    let smiles = dir.path().join("smiles.csv");
    let rates = dir.path().join("rates.csv");
    let data = ["--smiles", smiles.to_str().unwrap(), "--rates", rates.to_str().unwrap()];

    let mut args = vec!["calibrate"];
    args.extend(data);
    let o = pathint(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("calibration.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    let fits = report["slices"].as_array().unwrap();
    assert_eq!(fits.len(), 2);
    for f in fits {
        let k3 = f["params"]["kappas"][0].as_f64().unwrap();
        let t = f["params"]["t_n"].as_f64().unwrap();
        assert!((k3 + 0.06 * t).abs() < 1e-3, "κ3 {k3} at t {t}");
    }
    let summary = std::fs::read_to_string(dir.path().join("calibration_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);

    let cal = dir.path().join("calibration.json");
    let mut args = vec!["experiment", "--calibration", cal.to_str().unwrap(), "--thetas", "1.1,1.3"];
    args.extend(data);
    let o = pathint(dir.path(), &args);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("experiment.csv")).unwrap();
    let mut lines = table.lines();
    assert_eq!(lines.next(), Some("strike,maturity_months,theta,barrier,price_pi,price_bs,neg_mass"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 2 * 5 * 2);
    for r in &rows {
        assert!(r[3] > r[0], "barrier above strike");
        assert!(r[4] >= 0.0 && r[5] >= 0.0);
    }
}

#[test]
fn validate_writes_a_report_for_selected_criteria() {
    let dir = tempfile::tempdir().unwrap();
    let o = pathint(dir.path(), &["validate", "--only", "1,4"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().filter(|l| l.starts_with("PASS")).count(), 2);
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("validation.json")).unwrap()).unwrap();
    assert_eq!(report["passed"], true);
    assert_eq!(report["criteria"].as_array().unwrap().len(), 2);

    let o = pathint(dir.path(), &["validate", "--only", "12"]);
    assert_eq!(o.status.code(), Some(2));
}
