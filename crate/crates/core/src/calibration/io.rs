//! CSV ingestion of smiles and rates, and report emission.

use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::fit::CalibrationReport;
use super::{RateQuote, SmileQuote, SmileSurface};
use crate::error::{Error, Result};

pub const SMILE_HEADER: [&str; 4] = ["date", "maturity_months", "delta", "vol"];
pub const RATES_HEADER: [&str; 4] = ["date", "maturity_months", "r_acc", "forward"];
pub const SUMMARY_HEADER: &str =
    "date,maturity_months,sigma,alpha,kappas,objective,density_rmse,negative_mass,converged";

#[derive(Deserialize)]
struct SmileRow {
    date: NaiveDate,
    maturity_months: u32,
    delta: f64,
    vol: f64,
}

#[derive(Deserialize)]
struct RateRow {
    date: NaiveDate,
    maturity_months: u32,
    r_acc: f64,
    forward: f64,
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::Deserialize { err, .. } => Error::Parse {
            line,
            message: err.to_string(),
        },
        other => Error::Parse {
            line,
            message: format!("{other:?}"),
        },
    }
}

fn read_rows<T: DeserializeOwned, R: Read>(reader: R, header: &[&str]) -> Result<Vec<T>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let got: Vec<String> = rdr.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if got != header {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header {}, got {}", header.join(","), got.join(",")),
        });
    }
    rdr.deserialize().map(|r| r.map_err(csv_error)).collect()
}

pub fn read_smiles<R: Read>(reader: R) -> Result<Vec<SmileQuote>> {
    Ok(read_rows::<SmileRow, _>(reader, &SMILE_HEADER)?
        .into_iter()
        .map(|r| SmileQuote {
            date: r.date,
            maturity_months: r.maturity_months,
            delta: r.delta,
            vol: r.vol,
        })
        .collect())
}

pub fn read_rates<R: Read>(reader: R) -> Result<Vec<RateQuote>> {
    Ok(read_rows::<RateRow, _>(reader, &RATES_HEADER)?
        .into_iter()
        .map(|r| RateQuote {
            date: r.date,
            maturity_months: r.maturity_months,
            r_acc: r.r_acc,
            forward: r.forward,
        })
        .collect())
}

pub fn load_surface(smiles: &Path, rates: &Path) -> Result<SmileSurface> {
    Ok(SmileSurface {
        quotes: read_smiles(std::fs::File::open(smiles)?)?,
        rates: read_rates(std::fs::File::open(rates)?)?,
    })
}

pub fn write_smiles<W: Write>(mut w: W, quotes: &[SmileQuote]) -> Result<()> {
    writeln!(w, "{}", SMILE_HEADER.join(","))?;
    for q in quotes {
        writeln!(w, "{},{},{},{}", q.date, q.maturity_months, q.delta, q.vol)?;
    }
    Ok(())
}

pub fn write_rates<W: Write>(mut w: W, rates: &[RateQuote]) -> Result<()> {
    writeln!(w, "{}", RATES_HEADER.join(","))?;
    for r in rates {
        writeln!(w, "{},{},{},{}", r.date, r.maturity_months, r.r_acc, r.forward)?;
    }
    Ok(())
}

/// One row per fitted slice; cumulants joined with `;` starting at κ₃.
pub fn write_summary<W: Write>(mut w: W, report: &CalibrationReport, fmt: impl Fn(f64) -> String) -> Result<()> {
    writeln!(w, "{SUMMARY_HEADER}")?;
    for s in &report.slices {
        let kappas: Vec<String> = s.params.kappas.iter().map(|&k| fmt(k)).collect();
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            s.date,
            s.maturity_months,
            fmt(s.params.sigma),
            fmt(s.params.alpha),
            kappas.join(";"),
            fmt(s.objective),
            fmt(s.density_rmse),
            fmt(s.negative_mass),
            s.converged
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_smiles_and_reports_bad_lines() {
        let good = "date,maturity_months,delta,vol\n2024-01-02,1,0.1,0.15\n2024-01-02,1,0.25,0.14\n";
        let q = read_smiles(good.as_bytes()).unwrap();
        assert_eq!(q.len(), 2);
        assert_eq!(q[1].delta, 0.25);
        let bad = "date,maturity_months,delta,vol\n2024-01-02,1,0.1,0.15\n2024-01-02,one,0.25,0.14\n";
        match read_smiles(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let header = "date,months,delta,vol\n";
        assert!(matches!(read_smiles(header.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn rates_round_trip() {
        let rates = vec![RateQuote {
            date: NaiveDate::from_ymd_opt(2024, 3, 1).unwrap(),
            maturity_months: 6,
            r_acc: 0.0125,
            forward: 5.1,
        }];
        let mut buf = Vec::new();
        write_rates(&mut buf, &rates).unwrap();
        assert_eq!(read_rates(buf.as_slice()).unwrap(), rates);
    }
}
