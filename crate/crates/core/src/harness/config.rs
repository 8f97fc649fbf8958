//! Scenario files.
//!
//! Scenarios are TOML. Only `[layout]` and `wind.mean` are required; every
//! other field falls back to the defaults below and the resolved file,
//! defaults included, is written next to the outputs. Unknown keys are
//! rejected so a typo cannot silently fall back to a default.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freq_control::{FreqCtrlParams, FrequencyTrace};
use crate::mpc::MpcConfig;
use crate::turbine::TurbineParams;
use crate::wind_field::{synth_freestream_with, FarmLayout, FreestreamTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    /// Free text; scenario files that approximate a published trajectory say so here.
    #[serde(default)]
    pub description: String,
    pub layout: LayoutSpec,
    pub wind: WindSpec,
    #[serde(default)]
    pub turbine: TurbineParams,
    #[serde(default)]
    pub frequency: FrequencySpec,
    #[serde(default)]
    pub dispatch: DispatchSpec,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub simulation: SimulationSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    /// One streamwise column.
    #[default]
    Column,
    /// `count` turbines per column, `lateral_count` columns.
    Grid,
    /// Positions listed in metres.
    Explicit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutSpec {
    pub kind: LayoutKind,
    /// Turbines per streamwise column.
    pub count: usize,
    /// Streamwise spacing in rotor diameters.
    pub spacing: f64,
    pub lateral_count: usize,
    /// Lateral spacing in rotor diameters.
    pub lateral_spacing: f64,
    /// `[x, y]` in metres, used by `kind = "explicit"`.
    pub positions: Vec<[f64; 2]>,
    pub rotor_diameter: f64,
    /// Degrees; 0 blows along +x.
    pub wind_direction: f64,
    pub wake_decay: f64,
    /// Deficit smoothing time constant, s.
    pub smoothing_time: f64,
}

impl Default for LayoutSpec {
    fn default() -> Self {
        LayoutSpec {
            kind: LayoutKind::Column,
            count: 8,
            spacing: 5.0,
            lateral_count: 1,
            lateral_spacing: 4.0,
            positions: Vec::new(),
            rotor_diameter: 126.0,
            wind_direction: 0.0,
            wake_decay: crate::wind_field::DEFAULT_WAKE_DECAY,
            smoothing_time: crate::wind_field::DEFAULT_SMOOTHING_TIME,
        }
    }
}

impl LayoutSpec {
    pub fn build(&self) -> Result<FarmLayout> {
        let mut layout = match self.kind {
            LayoutKind::Column => FarmLayout::column(self.count, self.spacing, self.rotor_diameter),
            LayoutKind::Grid => FarmLayout::grid(
                self.count,
                self.lateral_count,
                self.spacing,
                self.lateral_spacing,
                self.rotor_diameter,
            ),
            LayoutKind::Explicit => FarmLayout::new(
                self.positions.iter().map(|p| (p[0], p[1])).collect(),
                self.rotor_diameter,
            ),
        }
        .map_err(|e| Error::config("layout", e.to_string()))?;
        layout.wind_direction = self.wind_direction;
        layout.wake_decay = self.wake_decay;
        layout.smoothing_time = self.smoothing_time;
        layout.validate().map_err(|e| Error::config("layout", e.to_string()))?;
        Ok(layout)
    }

    fn validate(&self) -> Result<()> {
        match self.kind {
            LayoutKind::Column | LayoutKind::Grid => {
                if self.count == 0 {
                    return Err(Error::config("layout.count", "must be at least 1"));
                }
                if !(self.spacing > 0.0) {
                    return Err(Error::config("layout.spacing", "must be positive"));
                }
                if self.kind == LayoutKind::Grid {
                    if self.lateral_count == 0 {
                        return Err(Error::config("layout.lateral_count", "must be at least 1"));
                    }
                    if !(self.lateral_spacing > 0.0) {
                        return Err(Error::config("layout.lateral_spacing", "must be positive"));
                    }
                }
            }
            LayoutKind::Explicit => {
                if self.positions.is_empty() {
                    return Err(Error::config("layout.positions", "explicit layout needs positions"));
                }
            }
        }
        if !(self.rotor_diameter > 0.0) {
            return Err(Error::config("layout.rotor_diameter", "must be positive"));
        }
        if !(self.wake_decay > 0.0) {
            return Err(Error::config("layout.wake_decay", "must be positive"));
        }
        if !(self.smoothing_time >= 0.0) {
            return Err(Error::config("layout.smoothing_time", "must be >= 0"));
        }
        self.build().map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindSpec {
    /// Mean freestream speed, m/s.
    pub mean: f64,
    /// Turbulence intensity (standard deviation over mean).
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub seed: u64,
    /// AR(1) correlation time, s.
    #[serde(default = "default_correlation_time")]
    pub correlation_time: f64,
    /// `time_s, speed_mps` CSV replacing the synthetic series.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

fn default_sigma() -> f64 {
    0.1
}

fn default_correlation_time() -> f64 {
    crate::wind_field::DEFAULT_CORRELATION_TIME
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FrequencyProfile {
    /// See [`FrequencyTrace::synthetic`].
    #[default]
    Synthetic,
    Constant,
    /// Read from `frequency.trace`.
    Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrequencySpec {
    /// Nominal grid frequency, Hz.
    pub nominal: f64,
    /// Droop gain, MW/Hz.
    pub k_d: f64,
    /// Inertia gain, MW·s/Hz.
    pub k_i: f64,
    /// Derivative filter time constant, s.
    pub filter_time: f64,
    pub profile: FrequencyProfile,
    /// Peak excursion of the synthetic profile, Hz.
    pub amplitude: f64,
    /// `time_s, freq_hz` CSV for `profile = "trace"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<PathBuf>,
}

impl Default for FrequencySpec {
    fn default() -> Self {
        let p = FreqCtrlParams::default();
        FrequencySpec {
            nominal: 50.0,
            k_d: p.k_d,
            k_i: p.k_i,
            filter_time: p.filter_time,
            profile: FrequencyProfile::Synthetic,
            amplitude: 0.1,
            trace: None,
        }
    }
}

impl FrequencySpec {
    pub fn params(&self) -> FreqCtrlParams {
        FreqCtrlParams {
            k_d: self.k_d,
            k_i: self.k_i,
            filter_time: self.filter_time,
        }
    }

    pub fn trace(&self, duration: f64, dt: f64) -> Result<FrequencyTrace> {
        let t = match self.profile {
            FrequencyProfile::Synthetic => FrequencyTrace::synthetic(self.nominal, self.amplitude, duration, dt),
            FrequencyProfile::Constant => FrequencyTrace::constant(self.nominal, duration, dt),
            FrequencyProfile::Trace => {
                let path = self
                    .trace
                    .as_ref()
                    .ok_or_else(|| Error::config("frequency.trace", "required when profile = \"trace\""))?;
                FrequencyTrace::from_csv(path, self.nominal, duration, dt)
            }
        };
        t.map_err(|e| Error::config("frequency", e.to_string()))
    }
}

/// Farm power command `P_command(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DispatchSpec {
    /// Fraction of the steady greedy available power, used when `schedule` is empty.
    pub fraction: f64,
    /// Piecewise-constant `[time_s, MW]` breakpoints; the first value also
    /// applies before its time.
    pub schedule: Vec<[f64; 2]>,
}

impl Default for DispatchSpec {
    fn default() -> Self {
        DispatchSpec {
            fraction: 0.8,
            schedule: Vec::new(),
        }
    }
}

impl DispatchSpec {
    /// Command in watts at time `t`, given the available power for the
    /// fractional default.
    pub fn command_at(&self, t: f64, available: f64) -> f64 {
        if self.schedule.is_empty() {
            return self.fraction * available;
        }
        let mut mw = self.schedule[0][1];
        for [at, v] in &self.schedule {
            if *at <= t {
                mw = *v;
            } else {
                break;
            }
        }
        mw * 1e6
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fidelity {
    /// Speed/pitch servo with rotor dynamics.
    #[default]
    Full,
    /// Realized `C_T'` is exactly the one the prediction model assumes.
    Ideal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSpec {
    /// Control period, s.
    pub dt: f64,
    /// Simulated time, s; a multiple of `dt`.
    pub duration: f64,
    pub fidelity: Fidelity,
    /// Uncertified solves tolerated before the run is aborted.
    pub failure_budget: usize,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            dt: 1.0,
            duration: 300.0,
            fidelity: Fidelity::Full,
            failure_budget: 10,
        }
    }
}

impl SimulationSpec {
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: PathBuf,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec { dir: PathBuf::from("out") }
    }
}

impl ScenarioConfig {
    /// Scenario with the given layout and mean wind, everything else default.
    pub fn new(layout: LayoutSpec, mean_wind: f64) -> Self {
        ScenarioConfig {
            name: String::new(),
            description: String::new(),
            layout,
            wind: WindSpec {
                mean: mean_wind,
                sigma: default_sigma(),
                seed: 0,
                correlation_time: default_correlation_time(),
                trace: None,
            },
            turbine: TurbineParams::default(),
            frequency: FrequencySpec::default(),
            dispatch: DispatchSpec::default(),
            mpc: MpcConfig::default(),
            simulation: SimulationSpec::default(),
            output: OutputSpec::default(),
        }
    }

    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml_str(text: &str, base_dir: Option<&Path>) -> Result<Self> {
        let mut cfg: ScenarioConfig = toml::from_str(text).map_err(|e| Error::Parse {
            context: "scenario".into(),
            message: e.to_string(),
        })?;
        if let Some(base) = base_dir {
            for p in [
                &mut cfg.wind.trace,
                &mut cfg.frequency.trace,
                &mut cfg.turbine.ct_table,
            ]
            .into_iter()
            .flatten()
            {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Internal(format!("config serialization: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        self.layout.validate()?;
        if !(self.wind.mean > 0.0) {
            return Err(Error::config("wind.mean", "must be positive"));
        }
        if !(self.wind.sigma >= 0.0) {
            return Err(Error::config("wind.sigma", "must be >= 0"));
        }
        if !(self.wind.correlation_time >= 0.0) {
            return Err(Error::config("wind.correlation_time", "must be >= 0"));
        }
        self.turbine.validate()?;
        let r = 0.5 * self.layout.rotor_diameter;
        if (self.turbine.rotor_radius - r).abs() > 1e-9 * r {
            return Err(Error::config(
                "turbine.rotor_radius",
                format!("must equal half of layout.rotor_diameter ({r} m)"),
            ));
        }
        if !(self.frequency.nominal > 0.0) {
            return Err(Error::config("frequency.nominal", "must be positive"));
        }
        if !(self.frequency.amplitude >= 0.0)
            || self.frequency.amplitude > crate::freq_control::MAX_DEVIATION
        {
            return Err(Error::config("frequency.amplitude", "must lie in [0, 2] Hz"));
        }
        self.frequency.params().validate()?;
        if self.frequency.profile == FrequencyProfile::Trace && self.frequency.trace.is_none() {
            return Err(Error::config("frequency.trace", "required when profile = \"trace\""));
        }
        if !(self.dispatch.fraction >= 0.0) {
            return Err(Error::config("dispatch.fraction", "must be >= 0"));
        }
        if self.dispatch.schedule.iter().any(|[t, p]| !t.is_finite() || !(*p >= 0.0)) {
            return Err(Error::config("dispatch.schedule", "entries must be finite with MW >= 0"));
        }
        if self.dispatch.schedule.windows(2).any(|w| !(w[1][0] > w[0][0])) {
            return Err(Error::config("dispatch.schedule", "times must be strictly increasing"));
        }
        self.mpc.validate()?;
        let sim = &self.simulation;
        if !(sim.dt > 0.0) {
            return Err(Error::config("simulation.dt", "must be positive"));
        }
        if !(sim.duration > 0.0) {
            return Err(Error::config("simulation.duration", "must be positive"));
        }
        let steps = (sim.duration / sim.dt).round();
        if steps < 1.0 || (steps * sim.dt - sim.duration).abs() > 1e-9 * sim.duration {
            return Err(Error::config("simulation.duration", "must be a positive multiple of dt"));
        }
        Ok(())
    }

    pub fn freestream(&self) -> Result<FreestreamTrace> {
        let sim = &self.simulation;
        let t = match &self.wind.trace {
            Some(path) => FreestreamTrace::from_csv(path, sim.dt, sim.duration),
            None => synth_freestream_with(
                self.wind.mean,
                self.wind.sigma,
                self.wind.seed,
                sim.duration,
                sim.dt,
                self.wind.correlation_time,
            ),
        };
        t.map_err(|e| Error::config("wind", e.to_string()))
    }

    /// Turbine parameters with any thrust table loaded.
    pub fn turbine_params(&self) -> Result<TurbineParams> {
        let mut p = self.turbine.clone();
        p.load_table()?;
        Ok(p)
    }
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ScenarioConfig::from_toml_str(&text, path.parent()).map_err(|e| match e {
        Error::Parse { message, .. } => Error::Parse {
            context: path.display().to_string(),
            message,
        },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[layout]\n[wind]\nmean = 9.0\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let c = ScenarioConfig::from_toml_str(MINIMAL, None).unwrap();
        assert_eq!(c.turbine.air_density, 1.2);
        assert_eq!(c.frequency.k_d, 50.0);
        assert_eq!(c.frequency.k_i, 10.0);
        assert_eq!(c.mpc.filter_time_constant, 5.0);
        assert_eq!(c.mpc.horizon, 10);
        assert_eq!((c.mpc.ct_min, c.mpc.ct_max, c.mpc.ct_rate), (0.1, 2.0, 0.2));
        assert_eq!(c.mpc.weights.r, 1e12);
        assert_eq!(c.wind.sigma, 0.1);
        assert_eq!(c.layout.rotor_diameter, 126.0);
        assert_eq!(c.layout.count, 8);
        assert_eq!(c.simulation.steps(), 300);
    }

    #[test]
    fn errors_name_the_field() {
        let e = ScenarioConfig::from_toml_str(&format!("{MINIMAL}[mpc]\nhorizon = 0\n"), None).unwrap_err();
        assert!(e.to_string().contains("horizon"), "{e}");
        let e = ScenarioConfig::from_toml_str("[layout]\n[wind]\nsigma = 0.1\n", None).unwrap_err();
        assert!(e.to_string().contains("mean"), "{e}");
        let e = ScenarioConfig::from_toml_str("[wind]\nmean = 9.0\n", None).unwrap_err();
        assert!(e.to_string().contains("layout"), "{e}");
        let e = ScenarioConfig::from_toml_str(&format!("{MINIMAL}[mpc]\nhorizn = 3\n"), None).unwrap_err();
        assert!(e.to_string().contains("horizn"), "{e}");
        let e = ScenarioConfig::from_toml_str(&format!("{MINIMAL}[simulation]\nduration = 10.5\n"), None)
            .unwrap_err();
        assert!(e.to_string().contains("duration"), "{e}");
        let e = ScenarioConfig::from_toml_str(&format!("{MINIMAL}[mpc]\nmode = \"greedy\"\n"), None).unwrap_err();
        assert!(e.to_string().contains("mode"), "{e}");
        let e = ScenarioConfig::from_toml_str(&format!("{MINIMAL}[mpc]\nct_min = 2.5\n"), None).unwrap_err();
        assert!(e.to_string().contains("ct_min"), "{e}");
    }

    #[test]
    fn round_trips_through_toml() {
        let mut c = ScenarioConfig::from_toml_str(MINIMAL, None).unwrap();
        c.dispatch.schedule = vec![[0.0, 12.5], [100.0, 14.0]];
        c.mpc.weights.w = 1e4;
        c.layout.kind = LayoutKind::Grid;
        c.layout.lateral_count = 2;
        let text = c.to_toml_string().unwrap();
        assert_eq!(ScenarioConfig::from_toml_str(&text, None).unwrap(), c);
    }

    #[test]
    fn relative_paths_resolve_against_the_file() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("u.csv"), "t,u\n0,8\n400,10\n").unwrap();
        let path = dir.path().join("s.toml");
        std::fs::write(&path, "[layout]\ncount = 2\n[wind]\nmean = 9.0\ntrace = \"u.csv\"\n").unwrap();
        let c = load_scenario(&path).unwrap();
        let u = c.freestream().unwrap();
        assert_eq!(u.samples.len(), 300);
        assert!((u.at(200) - 9.0).abs() < 1e-12);
    }

    #[test]
    fn schedule_is_piecewise_constant() {
        let d = DispatchSpec {
            fraction: 0.8,
            schedule: vec![[10.0, 5.0], [20.0, 7.0]],
        };
        assert_eq!(d.command_at(0.0, 1.0), 5e6);
        assert_eq!(d.command_at(19.9, 1.0), 5e6);
        assert_eq!(d.command_at(20.0, 1.0), 7e6);
        assert_eq!(DispatchSpec::default().command_at(3.0, 10e6), 8e6);
    }
}
