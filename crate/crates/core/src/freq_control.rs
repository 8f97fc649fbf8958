//! Droop and virtual-inertia power reference.
//!
//! `P_ref = p_command + K_D·Δf + K_I·dΔf/dt` with `Δf = f₀ − f_measure`, so
//! under-frequency and a falling frequency both raise the reference. Power is
//! in MW inside this module; [`PowerReference`] converts at its boundary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::wind_field::{read_two_column_csv, resample};

/// Largest plausible excursion from nominal, Hz.
pub const MAX_DEVIATION: f64 = 2.0;

/// Measured grid frequency sampled on the controller grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyTrace {
    pub dt: f64,
    pub samples: Vec<f64>,
    pub nominal: f64,
}

impl FrequencyTrace {
    pub fn new(dt: f64, samples: Vec<f64>, nominal: f64) -> Result<Self> {
        if !(dt > 0.0) || !(nominal > 0.0) {
            return Err(Error::invalid("frequency trace needs dt > 0 and f0 > 0"));
        }
        if samples.is_empty() {
            return Err(Error::invalid("empty frequency trace"));
        }
        if let Some(f) = samples
            .iter()
            .find(|f| !((*f - nominal).abs() <= MAX_DEVIATION))
        {
            return Err(Error::invalid(format!(
                "frequency sample {f} Hz is more than {MAX_DEVIATION} Hz from {nominal} Hz"
            )));
        }
        Ok(FrequencyTrace {
            dt,
            samples,
            nominal,
        })
    }

    /// Flat trace at nominal frequency.
    pub fn constant(nominal: f64, duration: f64, dt: f64) -> Result<Self> {
        let n = steps(duration, dt)?;
        Self::new(dt, vec![nominal; n], nominal)
    }

    /// Slow sinusoidal excursion of `amplitude` Hz with the given period.
    pub fn sinusoid(nominal: f64, amplitude: f64, period: f64, duration: f64, dt: f64) -> Result<Self> {
        let n = steps(duration, dt)?;
        let w = 2.0 * std::f64::consts::PI / period;
        let samples = (0..n)
            .map(|k| nominal - amplitude * (w * k as f64 * dt).sin())
            .collect();
        Self::new(dt, samples, nominal)
    }

    /// PMU-like wander: three incommensurate sinusoids (300, 97 and 23 s)
    /// whose amplitudes add up to `amplitude`, so the excursion never exceeds
    /// it and reaches close to it once per slow period.
    pub fn synthetic(nominal: f64, amplitude: f64, duration: f64, dt: f64) -> Result<Self> {
        const PARTS: [(f64, f64, f64); 3] = [(0.6, 300.0, 0.0), (0.3, 97.0, 1.0), (0.1, 23.0, 2.0)];
        let n = steps(duration, dt)?;
        let tau = 2.0 * std::f64::consts::PI;
        let samples = (0..n)
            .map(|k| {
                let t = k as f64 * dt;
                let wander: f64 = PARTS
                    .iter()
                    .map(|(a, period, phase)| a * (tau * t / period + phase).sin())
                    .sum();
                nominal - amplitude * wander
            })
            .collect();
        Self::new(dt, samples, nominal)
    }

    /// Two-column `time_s, freq_hz` CSV resampled linearly onto the grid.
    pub fn from_csv(path: impl AsRef<Path>, nominal: f64, duration: f64, dt: f64) -> Result<Self> {
        let (t, f) = read_two_column_csv(path.as_ref())?;
        let samples = resample(&t, &f, dt, duration)?;
        Self::new(dt, samples, nominal)
    }

    /// Sample `k`, holding the last value past the end.
    pub fn at(&self, k: usize) -> f64 {
        self.samples[k.min(self.samples.len() - 1)]
    }
}

fn steps(duration: f64, dt: f64) -> Result<usize> {
    if !(duration > 0.0) || !(dt > 0.0) {
        return Err(Error::invalid("duration and dt must be positive"));
    }
    Ok((duration / dt).round().max(1.0) as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FreqCtrlParams {
    /// Droop gain, MW/Hz.
    pub k_d: f64,
    /// Inertia gain, MW·s/Hz.
    pub k_i: f64,
    /// Derivative low-pass time constant, s.
    pub filter_time: f64,
}

impl Default for FreqCtrlParams {
    fn default() -> Self {
        FreqCtrlParams {
            k_d: 50.0,
            k_i: 10.0,
            filter_time: 1.0,
        }
    }
}

impl FreqCtrlParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_d >= 0.0) {
            return Err(Error::config("frequency.k_d", "must be >= 0"));
        }
        if !(self.k_i >= 0.0) {
            return Err(Error::config("frequency.k_i", "must be >= 0"));
        }
        if !(self.filter_time >= 0.0) {
            return Err(Error::config("frequency.filter_time", "must be >= 0"));
        }
        Ok(())
    }
}

/// Backward difference followed by a first-order low-pass. The filter state
/// starts at the first difference.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeFilter {
    alpha: f64,
    dt: f64,
    last: Option<f64>,
    output: Option<f64>,
}

impl DerivativeFilter {
    pub fn new(filter_time: f64, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !(filter_time >= 0.0) {
            return Err(Error::invalid("derivative filter needs dt > 0 and filter time >= 0"));
        }
        let alpha = if filter_time == 0.0 {
            0.0
        } else {
            (-dt / filter_time).exp()
        };
        Ok(DerivativeFilter {
            alpha,
            dt,
            last: None,
            output: None,
        })
    }

    /// Feeds one sample; returns the filtered derivative (0 until two samples
    /// have been seen).
    pub fn update(&mut self, sample: f64) -> f64 {
        if let Some(prev) = self.last {
            let d = (sample - prev) / self.dt;
            let y = match self.output {
                Some(y) => self.alpha * y + (1.0 - self.alpha) * d,
                None => d,
            };
            self.output = Some(y);
        }
        self.last = Some(sample);
        self.output.unwrap_or(0.0)
    }
}

/// Filtered derivative at the end of `samples`.
pub fn derivative_estimate(samples: &[f64], dt: f64, filter_time: f64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(Error::invalid("derivative estimate needs at least 2 samples"));
    }
    let mut filt = DerivativeFilter::new(filter_time, dt)?;
    let mut y = 0.0;
    for &s in samples {
        y = filt.update(s);
    }
    Ok(y)
}

/// Affine core: `p_command + K_D·Δf + K_I·dΔf/dt`, clamped at 0. MW.
pub fn reference_from(p_command: f64, delta_f: f64, delta_f_rate: f64, params: &FreqCtrlParams) -> f64 {
    (p_command + params.k_d * delta_f + params.k_i * delta_f_rate).max(0.0)
}

/// Power reference in MW from the latest frequency window.
pub fn power_reference(
    p_command: f64,
    window: &[f64],
    nominal: f64,
    params: &FreqCtrlParams,
    dt: f64,
) -> Result<f64> {
    let last = *window
        .last()
        .ok_or_else(|| Error::invalid("empty frequency window"))?;
    let rate = if window.len() >= 2 {
        derivative_estimate(window, dt, params.filter_time)?
    } else {
        0.0
    };
    Ok(reference_from(p_command, nominal - last, -rate, params))
}

/// Streaming form used by the scenario loop. Takes and returns watts.
#[derive(Debug, Clone)]
pub struct PowerReference {
    params: FreqCtrlParams,
    nominal: f64,
    filter: DerivativeFilter,
}

impl PowerReference {
    pub fn new(params: FreqCtrlParams, nominal: f64, dt: f64) -> Result<Self> {
        params.validate()?;
        Ok(PowerReference {
            params,
            nominal,
            filter: DerivativeFilter::new(params.filter_time, dt)?,
        })
    }

    pub fn update(&mut self, p_command_w: f64, f_measure: f64) -> f64 {
        let rate = self.filter.update(f_measure);
        1e6 * reference_from(p_command_w * 1e-6, self.nominal - f_measure, -rate, &self.params)
    }
}
