//! Penalty-factor sweeps over `(w, s)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::normalize;
use crate::mpc::ControllerMode;

use super::config::ScenarioConfig;
use super::run::{run, ResultsBundle};

/// One sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub w: f64,
    pub s: f64,
    /// RMS of `P_total − P_ref`, W.
    pub rms: f64,
    pub df: f64,
    pub ef: f64,
    /// Relative to the `w = 0` cell when the grid has one.
    pub df_normalized: Option<f64>,
    pub ef_normalized: Option<f64>,
    pub failures: usize,
    pub aborted: bool,
    /// Largest KKT residual seen in the run.
    pub worst_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    /// Sorted by `w`, then `s`.
    pub rows: Vec<SweepRow>,
}

impl SweepTable {
    pub fn get(&self, w: f64, s: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.w == w && r.s == s)
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut out = String::from("w,s,rms_w,df_n,ef_n,df_norm,ef_norm,failures,aborted,worst_residual\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.w,
                r.s,
                r.rms,
                r.df,
                r.ef,
                opt(r.df_normalized),
                opt(r.ef_normalized),
                r.failures,
                r.aborted,
                r.worst_residual
            ));
        }
        out
    }
}

/// The scenario with the proposed objective and the given penalty factors.
pub fn cell_config(base: &ScenarioConfig, w: f64, s: f64) -> ScenarioConfig {
    let mut c = base.clone();
    c.mpc.mode = ControllerMode::Proposed;
    c.mpc.weights.w = w;
    c.mpc.weights.s = s;
    c
}

/// Runs every `(w, s)` cell in parallel. All cells share the scenario's wind
/// and frequency seeds; only the weights differ.
pub fn sweep(base: &ScenarioConfig, grid: &[(f64, f64)]) -> Result<SweepTable> {
    Ok(sweep_bundles(base, grid)?.0)
}

/// As [`sweep`], also returning each cell's bundle in table order.
pub fn sweep_bundles(base: &ScenarioConfig, grid: &[(f64, f64)]) -> Result<(SweepTable, Vec<ResultsBundle>)> {
    if grid.is_empty() {
        return Err(Error::invalid("sweep grid is empty"));
    }
    let mut cells: Vec<(f64, f64)> = grid.to_vec();
    cells.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    cells.dedup();
    let bundles: Vec<ResultsBundle> = cells
        .par_iter()
        .map(|&(w, s)| run(&cell_config(base, w, s)))
        .collect::<Result<_>>()?;

    // w = 0 makes s irrelevant; the first such cell is the reference
    let baseline = cells.iter().position(|c| c.0 == 0.0).map(|k| &bundles[k].report);
    let rows = cells
        .iter()
        .zip(&bundles)
        .map(|(&(w, s), b)| {
            let norm = baseline.and_then(|base| normalize(&b.report, base).ok());
            SweepRow {
                w,
                s,
                rms: b.report.rms_tracking_error,
                df: b.report.df,
                ef: b.report.ef,
                df_normalized: norm.as_ref().and_then(|r| r.df_normalized),
                ef_normalized: norm.as_ref().and_then(|r| r.ef_normalized),
                failures: b.failures,
                aborted: b.aborted_at.is_some(),
                worst_residual: b.worst_residual(),
            }
        })
        .collect();
    Ok((SweepTable { rows }, bundles))
}
