//! CSV series written by the commands and read back by `plot`.

use std::path::Path;

use vfp_core::diagnostics::AuditReport;
use vfp_core::solver::{ContinuationRow, Sample};

use crate::error::{Error, Result};

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_rows(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    w.write_record(header).map_err(Error::csv(path))?;
    for r in rows {
        w.write_record(&r).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

/// `time, mass, mom_1..mom_N, energy, entropy, dissipation, third_moment`
pub fn write_trajectory(path: &Path, dim: usize, samples: &[Sample]) -> Result<()> {
    let mut header = vec!["time".to_string(), "mass".to_string()];
    header.extend((1..=dim).map(|k| format!("mom_{k}")));
    header.extend(["energy", "entropy", "dissipation", "third_moment"].map(String::from));
    let rows = samples.iter().map(|s| {
        let mut r = vec![num(s.time), num(s.mass)];
        r.extend(s.momentum[..dim].iter().map(|&p| num(p)));
        r.extend([s.energy, s.entropy, s.dissipation, s.third_moment].map(num));
        r
    });
    write_rows(path, &header, rows)
}

/// `eps, delta, dist_rho, dist_mom, dist_energy` for the rows that carry a
/// distance, either to the previous row or to the reference.
pub fn write_continuation(path: &Path, rows: &[ContinuationRow], to_reference: bool) -> Result<()> {
    let header = ["eps", "delta", "dist_rho", "dist_mom", "dist_energy"].map(String::from);
    let rows = rows.iter().filter_map(|r| {
        let d = if to_reference { r.to_reference } else { r.successive }?;
        Some(vec![
            num(r.params.eps()),
            num(r.params.delta()),
            num(d.rho),
            num(d.mom),
            num(d.energy),
        ])
    });
    write_rows(path, &header, rows)
}

/// `iteration, residual`
pub fn write_residuals(path: &Path, residuals: &[f64]) -> Result<()> {
    let header = ["iteration", "residual"].map(String::from);
    let rows = residuals
        .iter()
        .enumerate()
        .map(|(k, &r)| vec![(k + 1).to_string(), num(r)]);
    write_rows(path, &header, rows)
}

/// Arbitrary numeric table.
pub fn write_table(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let header: Vec<String> = header.iter().map(|s| s.to_string()).collect();
    write_rows(path, &header, rows.iter().map(|r| r.iter().map(|&x| num(x)).collect()))
}

/// `check,value,bound,status,anchor`
pub fn write_audit(path: &Path, report: &AuditReport) -> Result<()> {
    std::fs::write(path, report.to_csv()).map_err(Error::io(path))
}

/// A numeric CSV file: header and columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    let header = r
        .headers()
        .map_err(Error::csv(path))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(Error::csv(path))?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| Error::Parse {
                    path: path.to_path_buf(),
                    line: rows.len() + 2,
                    reason: format!("{s}: {e}"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(Table { header, rows })
}
