//! Sample files and report writers.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{CliError, Result};
use crate::harness::{SweepRow, TrialReport};

/// Parses one decimal number per line. Blank lines and anything after `#` are ignored.
pub fn parse_samples(text: &str) -> std::result::Result<Vec<f64>, (usize, String)> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        match body.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ => return Err((i + 1, format!("expected a finite number, found `{body}`"))),
        }
    }
    Ok(out)
}

pub fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_samples(&text).map_err(|(line, message)| CliError::SampleFile { path: path.into(), line, message })
}

pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut text = String::with_capacity(samples.len() * 24);
    for v in samples {
        text.push_str(&format!("{v}\n"));
    }
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

#[derive(Serialize)]
struct TrialRow<'a> {
    estimator: &'a str,
    trial: usize,
    abs_error: Option<f64>,
}

#[derive(Serialize)]
struct SummaryRow<'a> {
    estimator: &'a str,
    q50: f64,
    q90: f64,
    q_1_minus_delta: f64,
    q99: f64,
    #[serde(rename = "oracle_I_r")]
    oracle_i_r: f64,
    bound: f64,
    bound_ratio: f64,
}

fn csv_string<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Parse(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Columns `estimator,trial,abs_error`; failed trials leave `abs_error` empty.
pub fn trials_csv(report: &TrialReport) -> Result<String> {
    csv_string(report.estimators.iter().flat_map(|e| {
        e.errors.iter().enumerate().map(|(trial, err)| TrialRow {
            estimator: e.estimator.name(),
            trial,
            abs_error: *err,
        })
    }))
}

/// Columns `estimator,q50,q90,q_1_minus_delta,q99,oracle_I_r,bound,bound_ratio`.
pub fn summary_csv(report: &TrialReport) -> Result<String> {
    csv_string(report.estimators.iter().map(|e| SummaryRow {
        estimator: e.estimator.name(),
        q50: e.q50,
        q90: e.q90,
        q_1_minus_delta: e.q_1_minus_delta,
        q99: e.q99,
        oracle_i_r: report.oracle_i_r,
        bound: report.bound,
        bound_ratio: e.bound_ratio,
    }))
}

/// Columns `spec_id,r,I_r,tail_bound,error`.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    csv_string(rows)
}

/// Writes `trials.csv`, `summary.csv` and `report.json` into `dir`.
pub fn write_report_dir(dir: &Path, report: &TrialReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    for (name, body) in [
        ("trials.csv", trials_csv(report)?),
        ("summary.csv", summary_csv(report)?),
        ("report.json", to_json(report)?),
    ] {
        let path = dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}

/// Writes to `path`, or to stdout when it is `None`.
pub fn emit(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, body).map_err(|e| CliError::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes()).map_err(|e| CliError::io("<stdout>", e))
        }
    }
}
