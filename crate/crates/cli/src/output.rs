//! Report files. Everything is written by one writer after the run joins.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ricci_lab::CheckReport;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiments::Outcome;

pub const SCHEMA: u32 = 1;

/// The full report. The timestamp is the only field that varies between
/// identical runs.
pub fn report_json(cfg: &ExperimentConfig, outcome: &Outcome) -> Value {
    let passed = outcome.reports.iter().all(CheckReport::passed);
    let mut config = json!({
        "experiment": cfg.experiment,
        "space": cfg.space,
        "seed": cfg.seed,
        "params": outcome.params,
    });
    if outcome.uses_k {
        config["k"] = json!(cfg.k.clone().unwrap_or_default());
    }
    let timestamp = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    json!({
        "schema": SCHEMA,
        "tool": {"name": "ricci-lab", "version": env!("CARGO_PKG_VERSION")},
        "experiment": cfg.experiment,
        "config": config,
        "verdict": if passed { "pass" } else { "fail" },
        "reports": outcome.reports,
        "timestamp": timestamp,
    })
}

/// `check,margin,tolerance`, one row per residual. Numbers are printed
/// exactly as in report.json.
pub fn margins_csv(reports: &[CheckReport]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| CliError::Output(e.into());
    w.write_record(["check", "margin", "tolerance"]).map_err(io)?;
    for r in reports {
        let tol = number(r.tolerance);
        for m in &r.residuals {
            w.write_record([r.name.as_str(), &number(*m), &tol]).map_err(io)?;
        }
    }
    w.into_inner().map_err(|e| CliError::Output(e.into_error()))
}

fn number(x: f64) -> String {
    serde_json::to_string(&x).unwrap_or_else(|_| "null".into())
}

pub fn write_all(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<(), CliError> {
    let out = |e: std::io::Error| CliError::Output(e);
    fs::create_dir_all(dir).map_err(out)?;
    let mut report = serde_json::to_vec_pretty(&report_json(cfg, outcome)).map_err(|e| CliError::Output(e.into()))?;
    report.push(b'\n');
    fs::write(dir.join("report.json"), report).map_err(out)?;
    fs::write(dir.join("margins.csv"), margins_csv(&outcome.reports)?).map_err(out)?;
    if !outcome.plots.is_empty() {
        let plots = dir.join("plotdata");
        fs::create_dir_all(&plots).map_err(out)?;
        for p in &outcome.plots {
            fs::write(plots.join(&p.name), &p.bytes).map_err(out)?;
        }
    }
    Ok(())
}
