//! Report files: rejection-rate CSV, per-rep p-value CSV and full JSON.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{AppError, Result};
use crate::formats::write_json;
use crate::harness::ExperimentReport;

pub const RATES_HEADER: [&str; 6] = ["method", "setting", "alpha", "rejection_rate", "reps", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Both,
}

impl std::str::FromStr for ReportFormat {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "both" => Ok(Self::Both),
            other => Err(AppError::Config(format!("unknown format `{other}` (csv, json, both)"))),
        }
    }
}

#[derive(Serialize)]
struct RateRow<'a> {
    method: &'a str,
    setting: &'a str,
    alpha: f64,
    rejection_rate: f64,
    reps: usize,
    seed: u64,
}

#[derive(Serialize)]
struct PValueRow<'a> {
    method: &'a str,
    setting: &'a str,
    rep: usize,
    p_value: Option<f64>,
}

/// One row per (method, setting, alpha); `reps` counts successful reps.
pub fn write_rates_csv<W: Write>(reports: &[ExperimentReport], out: W) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    wtr.write_record(RATES_HEADER)?;
    for report in reports {
        for arm in &report.arms {
            for m in arm.methods.iter().filter(|m| m.available) {
                for rate in &m.rates {
                    wtr.serialize(RateRow {
                        method: m.method.name(),
                        setting: &arm.setting,
                        alpha: rate.alpha,
                        rejection_rate: rate.rejection_rate,
                        reps: m.successful(),
                        seed: report.config.seed,
                    })?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Failed reps have an empty `p_value`.
pub fn write_pvalues_csv<W: Write>(reports: &[ExperimentReport], out: W) -> std::result::Result<(), csv::Error> {
    let mut wtr = csv::Writer::from_writer(out);
    for report in reports {
        for arm in &report.arms {
            for m in arm.methods.iter().filter(|m| m.available) {
                for (rep, p) in m.p_values.iter().enumerate() {
                    wtr.serialize(PValueRow { method: m.method.name(), setting: &arm.setting, rep, p_value: *p })?;
                }
            }
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Writes `<stem>.csv` + `<stem>_pvalues.csv` and/or `<stem>.json`; returns
/// the paths written.
pub fn emit_report(reports: &[ExperimentReport], stem: &Path, format: ReportFormat) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if let Some(dir) = stem.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    }
    let with_ext = |suffix: &str| {
        let mut s = stem.as_os_str().to_owned();
        s.push(suffix);
        PathBuf::from(s)
    };
    if matches!(format, ReportFormat::Csv | ReportFormat::Both) {
        let rates = with_ext(".csv");
        let file = std::fs::File::create(&rates).map_err(AppError::io(&rates))?;
        write_rates_csv(reports, file).map_err(AppError::csv(&rates))?;
        let pvals = with_ext("_pvalues.csv");
        let file = std::fs::File::create(&pvals).map_err(AppError::io(&pvals))?;
        write_pvalues_csv(reports, file).map_err(AppError::csv(&pvals))?;
        written.push(rates);
        written.push(pvals);
    }
    if matches!(format, ReportFormat::Json | ReportFormat::Both) {
        let json = with_ext(".json");
        if reports.len() == 1 {
            write_json(&json, &reports[0])?;
        } else {
            write_json(&json, &reports)?;
        }
        written.push(json);
    }
    Ok(written)
}

/// Plain-text summary for the terminal.
pub fn summary(report: &ExperimentReport) -> String {
    let mut s = String::new();
    for arm in &report.arms {
        for m in &arm.methods {
            if !m.available {
                s.push_str(&format!("{:<10} {:<6} unavailable\n", m.method.name(), arm.setting));
                continue;
            }
            let rates: Vec<String> =
                m.rates.iter().map(|r| format!("alpha={} rate={:.3}", r.alpha, r.rejection_rate)).collect();
            s.push_str(&format!(
                "{:<10} {:<6} {} (reps={}, failed={})\n",
                m.method.name(),
                arm.setting,
                rates.join(" "),
                m.successful(),
                m.failures
            ));
        }
    }
    s
}
