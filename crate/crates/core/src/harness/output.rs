//! Result files.
//!
//! | file | columns |
//! |------|---------|
//! | `power.csv` | `t, P_ref, P_total, P_1..P_N` (W) |
//! | `loads.csv` | `t, F_1..F_N` (N) |
//! | `ct.csv` | `t, ct_1..ct_N` realized, then `cmd_1..cmd_N` commanded |
//! | `wind.csv` | `t, U_inf, U_1..U_N` (m/s) |
//! | `reference.csv` | `t, f, P_command, P_ref` |
//! | `solver.csv` | one row per control step |
//! | `metrics.json` | [`MetricsSummary`] |
//! | `config.toml` | resolved scenario, defaults included |
//!
//! Numbers are written in shortest round-trip form, so reading a file back
//! reproduces the in-memory series bit for bit.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::FatigueReport;
use crate::mpc::ControllerMode;

use super::config::Fidelity;
use super::run::ResultsBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub report: FatigueReport,
    pub steps: usize,
    pub turbines: usize,
    pub mode: ControllerMode,
    pub fidelity: Fidelity,
    pub w: f64,
    pub s: f64,
    pub seed: u64,
    pub available_power: f64,
    pub failures: usize,
    pub aborted_at: Option<usize>,
    pub worst_residual: f64,
    pub wake_clamps: usize,
}

impl MetricsSummary {
    pub fn of(b: &ResultsBundle) -> Self {
        MetricsSummary {
            report: b.report.clone(),
            steps: b.steps(),
            turbines: b.turbines(),
            mode: b.config.mpc.mode,
            fidelity: b.config.simulation.fidelity,
            w: b.config.mpc.weights.w,
            s: b.config.mpc.weights.s,
            seed: b.config.wind.seed,
            available_power: b.available_power,
            failures: b.failures,
            aborted_at: b.aborted_at,
            worst_residual: b.worst_residual(),
            wake_clamps: b.wake_clamps,
        }
    }
}

fn header(lead: &[&str], prefix: &str, n: usize) -> Vec<String> {
    lead.iter()
        .map(|s| s.to_string())
        .chain((1..=n).map(|i| format!("{prefix}_{i}")))
        .collect()
}

fn write_table(path: &Path, head: Vec<String>, rows: impl Iterator<Item = Vec<f64>>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&head)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn with_time(t: f64, lead: &[f64], rest: &[f64]) -> Vec<f64> {
    let mut row = Vec::with_capacity(1 + lead.len() + rest.len());
    row.push(t);
    row.extend_from_slice(lead);
    row.extend_from_slice(rest);
    row
}

/// Writes every result file into `dir`, creating it if needed.
pub fn write_outputs(bundle: &ResultsBundle, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let n = bundle.turbines();
    let b = bundle;
    let idx = 0..b.steps();

    write_table(
        &dir.join("power.csv"),
        header(&["t", "P_ref", "P_total"], "P", n),
        idx.clone().map(|k| with_time(b.time[k], &[b.p_ref[k], b.p_total[k]], &b.power[k])),
    )?;
    write_table(
        &dir.join("loads.csv"),
        header(&["t"], "F", n),
        idx.clone().map(|k| with_time(b.time[k], &[], &b.force[k])),
    )?;
    let mut ct_head = header(&["t"], "ct", n);
    ct_head.extend((1..=n).map(|i| format!("cmd_{i}")));
    write_table(
        &dir.join("ct.csv"),
        ct_head,
        idx.clone().map(|k| with_time(b.time[k], &b.ct[k], &b.command[k])),
    )?;
    write_table(
        &dir.join("wind.csv"),
        header(&["t", "U_inf"], "U", n),
        idx.clone().map(|k| with_time(b.time[k], &[b.freestream[k]], &b.wind[k])),
    )?;
    write_table(
        &dir.join("reference.csv"),
        header(&["t", "f", "P_command", "P_ref"], "", 0),
        idx.clone().map(|k| vec![b.time[k], b.frequency[k], b.p_command[k], b.p_ref[k]]),
    )?;

    let path = dir.join("solver.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record([
        "step",
        "status",
        "iterations",
        "polished",
        "stationarity",
        "primal",
        "dual",
        "complementarity",
        "objective",
    ])?;
    for (k, r) in b.solver.iter().enumerate() {
        let status = serde_json::to_value(r.status)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default();
        w.write_record([
            k.to_string(),
            status,
            r.iterations.to_string(),
            r.polished.to_string(),
            r.residuals.stationarity.to_string(),
            r.residuals.primal.to_string(),
            r.residuals.dual.to_string(),
            r.residuals.complementarity.to_string(),
            r.objective.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;

    let path = dir.join("metrics.json");
    let json = serde_json::to_string_pretty(&MetricsSummary::of(b))
        .map_err(|e| Error::Internal(format!("metrics serialization: {e}")))?;
    std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;

    let path = dir.join("config.toml");
    std::fs::write(&path, b.config.to_toml_string()?).map_err(|e| Error::io(&path, e))
}

/// Series read back from a results directory.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputSeries {
    pub time: Vec<f64>,
    pub p_ref: Vec<f64>,
    pub p_total: Vec<f64>,
    pub power: Vec<Vec<f64>>,
    pub force: Vec<Vec<f64>>,
    pub ct: Vec<Vec<f64>>,
    pub freestream: Vec<f64>,
    pub wind: Vec<Vec<f64>>,
}

fn read_table(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = csv::Reader::from_path(path)?;
    let head = rdr.headers()?.iter().map(str::to_string).collect();
    let mut rows = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    context: format!("{} row {}", path.display(), line + 2),
                    message: format!("`{s}` is not a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok((head, rows))
}

pub fn read_outputs(dir: impl AsRef<Path>) -> Result<OutputSeries> {
    let dir = dir.as_ref();
    let (_, power) = read_table(&dir.join("power.csv"))?;
    let (_, loads) = read_table(&dir.join("loads.csv"))?;
    let (ct_head, ct) = read_table(&dir.join("ct.csv"))?;
    let (_, wind) = read_table(&dir.join("wind.csv"))?;
    let n = ct_head.iter().filter(|h| h.starts_with("ct_")).count();
    Ok(OutputSeries {
        time: power.iter().map(|r| r[0]).collect(),
        p_ref: power.iter().map(|r| r[1]).collect(),
        p_total: power.iter().map(|r| r[2]).collect(),
        power: power.iter().map(|r| r[3..].to_vec()).collect(),
        force: loads.iter().map(|r| r[1..].to_vec()).collect(),
        ct: ct.iter().map(|r| r[1..=n].to_vec()).collect(),
        freestream: wind.iter().map(|r| r[1]).collect(),
        wind: wind.iter().map(|r| r[2..].to_vec()).collect(),
    })
}

pub fn read_metrics(dir: impl AsRef<Path>) -> Result<MetricsSummary> {
    let path = dir.as_ref().join("metrics.json");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })
}
