//! Fatigue and tracking evaluation indices.
//!
//! Load series are laid out as `series[t][i]`: one row per sample, one column
//! per turbine. Both fatigue indices divide by the sample count `T`, not
//! `T - 1`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Farm-level and per-turbine load indices for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FatigueReport {
    /// Per-turbine dynamic fatigue index, N.
    pub df_per_turbine: Vec<f64>,
    /// Farm dynamic fatigue index (sum of the per-turbine values), N.
    pub df: f64,
    /// Per-turbine deviation from the cross-farm mean load, N.
    pub ef_per_turbine: Vec<f64>,
    /// Farm load-equalization index, N.
    pub ef: f64,
    /// RMS of `P_total - P_ref`, W.
    pub rms_tracking_error: f64,
    /// `df / df_baseline`, when a baseline has been attached.
    pub df_normalized: Option<f64>,
    /// `ef / ef_baseline`, when a baseline has been attached.
    pub ef_normalized: Option<f64>,
    /// Number of samples `T`.
    pub samples: usize,
}

impl FatigueReport {
    /// Builds a report from a realized load series and the farm power trace.
    pub fn from_series(loads: &[Vec<f64>], p_total: &[f64], p_ref: &[f64]) -> Result<Self> {
        let (df_per_turbine, df) = dynamic_fatigue(loads)?;
        let (ef_per_turbine, ef) = if loads.first().map_or(0, Vec::len) >= 2 {
            equalization(loads)?
        } else {
            (vec![0.0; loads.first().map_or(0, Vec::len)], 0.0)
        };
        let rms_tracking_error = rms_error(p_total, p_ref)?;
        Ok(FatigueReport {
            df_per_turbine,
            df,
            ef_per_turbine,
            ef,
            rms_tracking_error,
            df_normalized: None,
            ef_normalized: None,
            samples: loads.len(),
        })
    }
}

fn check_rectangular(series: &[Vec<f64>]) -> Result<usize> {
    let n = series
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::invalid("empty load series"))?;
    if n == 0 {
        return Err(Error::invalid("load series has no turbines"));
    }
    if let Some(t) = series.iter().position(|row| row.len() != n) {
        return Err(Error::invalid(format!(
            "load series row {t} has {} columns, expected {n}",
            series[t].len()
        )));
    }
    Ok(n)
}

/// Dynamic fatigue index: RMS of the step-to-step load change per turbine,
/// summed over the farm. Returns `(dF_i, dF)`.
pub fn dynamic_fatigue(series: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = check_rectangular(series)?;
    let t_len = series.len();
    if t_len < 2 {
        return Err(Error::invalid("dynamic fatigue needs at least 2 samples"));
    }
    let mut acc = vec![0.0; n];
    for pair in series.windows(2) {
        for (a, (cur, prev)) in acc.iter_mut().zip(pair[1].iter().zip(&pair[0])) {
            let d = cur - prev;
            *a += d * d;
        }
    }
    let per: Vec<f64> = acc.iter().map(|s| (s / t_len as f64).sqrt()).collect();
    let total = per.iter().sum();
    Ok((per, total))
}

/// Load-equalization index: RMS deviation of each turbine's load from the
/// cross-turbine mean at each sample, summed over the farm. Returns
/// `(eF_i, eF)`.
pub fn equalization(series: &[Vec<f64>]) -> Result<(Vec<f64>, f64)> {
    let n = check_rectangular(series)?;
    if n < 2 {
        return Err(Error::invalid("load equalization needs at least 2 turbines"));
    }
    let t_len = series.len();
    let mut acc = vec![0.0; n];
    for row in series {
        let mean = row.iter().sum::<f64>() / n as f64;
        for (a, f) in acc.iter_mut().zip(row) {
            let d = f - mean;
            *a += d * d;
        }
    }
    let per: Vec<f64> = acc.iter().map(|s| (s / t_len as f64).sqrt()).collect();
    let total = per.iter().sum();
    Ok((per, total))
}

/// Root-mean-square tracking error between two equally long series.
pub fn rms_error(p_total: &[f64], p_ref: &[f64]) -> Result<f64> {
    if p_total.len() != p_ref.len() {
        return Err(Error::invalid(format!(
            "series lengths differ: {} vs {}",
            p_total.len(),
            p_ref.len()
        )));
    }
    if p_total.is_empty() {
        return Err(Error::invalid("empty power series"));
    }
    let ss: f64 = p_total
        .iter()
        .zip(p_ref)
        .map(|(p, r)| (p - r) * (p - r))
        .sum();
    Ok((ss / p_total.len() as f64).sqrt())
}

/// Attaches normalized indices relative to `baseline` (conventionally the
/// tracking-only `w = 0` run).
pub fn normalize(report: &FatigueReport, baseline: &FatigueReport) -> Result<FatigueReport> {
    if report.df_per_turbine.len() != baseline.df_per_turbine.len() {
        return Err(Error::invalid("report and baseline describe different farms"));
    }
    if baseline.df == 0.0 {
        return Err(Error::DegenerateBaseline("dF"));
    }
    if baseline.ef == 0.0 {
        return Err(Error::DegenerateBaseline("eF"));
    }
    let mut out = report.clone();
    out.df_normalized = Some(report.df / baseline.df);
    out.ef_normalized = Some(report.ef / baseline.ef);
    Ok(out)
}
