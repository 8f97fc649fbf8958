//! Single-turbine aerodynamics and active-power servo.
//!
//! Axial force and power both scale with the local thrust coefficient:
//! `F = ½ρA·C_T'·U²` and `P = ½ρA·C_T'·U³`, so `P / F = U` for every state.
//!
//! The servo is a single-mass drivetrain. A speed PI loop sets the
//! generator torque reference, the converter follows with a first-order lag,
//! and a rate-limited pitch PI loop takes over when power exceeds its limit.
//! The speed reference comes from inverting the `C_T'(λ, 0)` surface on its
//! rising branch, so the rotor settles at the tip-speed ratio that delivers
//! the commanded power.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Analytic `C_T'(λ, β)` surface with a single peak at `(lambda_opt, 0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CtSurface {
    pub ct_max: f64,
    pub lambda_opt: f64,
    /// Exponential decay per degree of pitch.
    pub pitch_decay: f64,
}

impl Default for CtSurface {
    fn default() -> Self {
        CtSurface {
            ct_max: 2.0,
            lambda_opt: 8.0,
            pitch_decay: 0.08,
        }
    }
}

impl CtSurface {
    pub fn eval(&self, lambda: f64, beta: f64) -> f64 {
        let x = lambda / self.lambda_opt;
        let v = self.ct_max * x * (1.0 - x).exp() * (-self.pitch_decay * beta).exp();
        v.clamp(0.0, self.ct_max)
    }
}

/// `C_T'(λ, β)` with the default surface constants.
pub fn ct_surface(lambda: f64, beta: f64) -> Result<f64> {
    if !(lambda >= 0.0) || !(beta >= 0.0) {
        return Err(Error::invalid("tip-speed ratio and pitch must be >= 0"));
    }
    Ok(CtSurface::default().eval(lambda, beta))
}

/// Tabulated `C_T'` on a `(λ, β)` grid, interpolated bilinearly and clamped
/// at the grid edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CtTable {
    pub lambdas: Vec<f64>,
    pub betas: Vec<f64>,
    /// `values[i][j]` is `C_T'(lambdas[i], betas[j])`.
    pub values: Vec<Vec<f64>>,
}

fn bracket(grid: &[f64], x: f64) -> (usize, f64) {
    if grid.len() == 1 || x <= grid[0] {
        return (0, 0.0);
    }
    let last = grid.len() - 1;
    if x >= grid[last] {
        return (last - 1, 1.0);
    }
    let i = grid.partition_point(|&g| g <= x) - 1;
    (i, (x - grid[i]) / (grid[i + 1] - grid[i]))
}

impl CtTable {
    pub fn new(lambdas: Vec<f64>, betas: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let increasing = |g: &[f64]| g.windows(2).all(|w| w[1] > w[0]);
        if lambdas.is_empty() || betas.is_empty() {
            return Err(Error::invalid("thrust table needs at least one λ and one β"));
        }
        if !increasing(&lambdas) || !increasing(&betas) {
            return Err(Error::invalid("thrust table axes must be strictly increasing"));
        }
        if values.len() != lambdas.len() || values.iter().any(|r| r.len() != betas.len()) {
            return Err(Error::invalid("thrust table shape does not match its axes"));
        }
        if values.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::invalid("thrust table values must be >= 0"));
        }
        Ok(CtTable {
            lambdas,
            betas,
            values,
        })
    }

    /// Reads a grid CSV: header row `label, β_1, β_2, ...`, then one row per
    /// λ with the λ value in the first column.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let ctx = |m: String| Error::Parse {
            context: path.display().to_string(),
            message: m,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)?;
        let mut rows = rdr.records();
        let header = rows.next().ok_or_else(|| ctx("empty file".into()))??;
        let betas = header
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>().map_err(|_| ctx(format!("bad β header `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        let mut lambdas = Vec::new();
        let mut values = Vec::new();
        for rec in rows {
            let rec = rec?;
            let mut nums = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| ctx(format!("bad number `{s}`"))));
            lambdas.push(nums.next().ok_or_else(|| ctx("empty row".into()))??);
            values.push(nums.collect::<Result<Vec<_>>>()?);
        }
        Self::new(lambdas, betas, values)
    }

    pub fn eval(&self, lambda: f64, beta: f64) -> f64 {
        let (i, tl) = bracket(&self.lambdas, lambda);
        let (j, tb) = bracket(&self.betas, beta);
        let v = |a: usize, b: usize| {
            self.values[a.min(self.lambdas.len() - 1)][b.min(self.betas.len() - 1)]
        };
        let lo = v(i, j) * (1.0 - tb) + v(i, j + 1) * tb;
        let hi = v(i + 1, j) * (1.0 - tb) + v(i + 1, j + 1) * tb;
        lo * (1.0 - tl) + hi * tl
    }
}

/// Physical and servo parameters of one turbine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TurbineParams {
    /// Air density ρ, kg/m³.
    pub air_density: f64,
    /// Rotor radius, m.
    pub rotor_radius: f64,
    /// Swept area, m².
    pub rotor_area: f64,
    /// Equivalent rotor-side inertia, kg·m².
    pub inertia: f64,
    pub gearbox_ratio: f64,
    /// Speed PI gains on generator torque, N·m per rad/s and N·m per rad.
    pub speed_kp: f64,
    pub speed_ki: f64,
    /// Converter lag, s.
    pub converter_time_constant: f64,
    /// Pitch PI gains, degrees per unit of normalized power error.
    pub pitch_kp: f64,
    pub pitch_ki: f64,
    /// Pitch rate limit, deg/s.
    pub pitch_rate_limit: f64,
    pub max_pitch: f64,
    /// Rated electrical power, W.
    pub rated_power: f64,
    pub min_rotor_speed: f64,
    pub max_rotor_speed: f64,
    pub surface: CtSurface,
    /// Optional `C_T'(λ, β)` grid file; see [`CtTable::from_csv`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ct_table: Option<PathBuf>,
    /// Replaces the analytic surface when present.
    #[serde(skip)]
    pub table: Option<CtTable>,
}

impl Default for TurbineParams {
    fn default() -> Self {
        let r = 63.0;
        TurbineParams {
            air_density: 1.2,
            rotor_radius: r,
            rotor_area: std::f64::consts::PI * r * r,
            inertia: 4.0e7,
            gearbox_ratio: 97.0,
            speed_kp: 3.0e6,
            speed_ki: 8.0e6,
            converter_time_constant: 0.1,
            pitch_kp: 10.0,
            pitch_ki: 5.0,
            pitch_rate_limit: 8.0,
            max_pitch: 90.0,
            rated_power: 5.0e6,
            min_rotor_speed: 0.01,
            max_rotor_speed: 2.0,
            surface: CtSurface::default(),
            ct_table: None,
            table: None,
        }
    }
}

/// Deadband above the power limit before the pitch loop integrates upward.
const PITCH_DEADBAND: f64 = 0.01;
/// Integration sub-steps per second of simulated time.
const SUBSTEPS_PER_SECOND: f64 = 50.0;

impl TurbineParams {
    /// Rotor of diameter `d` with the remaining defaults.
    pub fn with_rotor_diameter(d: f64) -> Self {
        let r = d / 2.0;
        TurbineParams {
            rotor_radius: r,
            rotor_area: std::f64::consts::PI * r * r,
            ..Default::default()
        }
    }

    /// Loads the grid named by `ct_table`, if any.
    pub fn load_table(&mut self) -> Result<()> {
        if let Some(path) = &self.ct_table {
            self.table = Some(CtTable::from_csv(path)?);
        }
        Ok(())
    }

    /// `½ρA`, the factor shared by force and power.
    pub fn half_rho_a(&self) -> f64 {
        0.5 * self.air_density * self.rotor_area
    }

    pub fn ct_max(&self) -> f64 {
        match &self.table {
            Some(t) => t.values.iter().flatten().copied().fold(0.0, f64::max),
            None => self.surface.ct_max,
        }
    }

    /// Surface lookup, clamped to `[0, ct_max]`.
    pub fn ct(&self, lambda: f64, beta: f64) -> f64 {
        match &self.table {
            Some(t) => t.eval(lambda, beta).clamp(0.0, self.ct_max()),
            None => self.surface.eval(lambda, beta),
        }
    }

    /// Tip-speed ratio of the β = 0 maximum.
    pub fn lambda_peak(&self) -> f64 {
        match &self.table {
            Some(t) => {
                let mut best = (t.lambdas[0], f64::NEG_INFINITY);
                for &l in &t.lambdas {
                    let v = t.eval(l, 0.0);
                    if v > best.1 {
                        best = (l, v);
                    }
                }
                best.0
            }
            None => self.surface.lambda_opt,
        }
    }

    /// Smallest `λ` on the rising branch with `C_T'(λ, 0) = ct`; saturates at
    /// the peak.
    pub fn lambda_for(&self, ct: f64) -> f64 {
        let peak = self.lambda_peak();
        if ct >= self.ct(peak, 0.0) {
            return peak;
        }
        let (mut lo, mut hi) = (0.0, peak);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.ct(mid, 0.0) < ct {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("air_density", self.air_density),
            ("rotor_radius", self.rotor_radius),
            ("rotor_area", self.rotor_area),
            ("inertia", self.inertia),
            ("gearbox_ratio", self.gearbox_ratio),
            ("speed_kp", self.speed_kp),
            ("speed_ki", self.speed_ki),
            ("converter_time_constant", self.converter_time_constant),
            ("pitch_kp", self.pitch_kp),
            ("pitch_ki", self.pitch_ki),
            ("pitch_rate_limit", self.pitch_rate_limit),
            ("max_pitch", self.max_pitch),
            ("rated_power", self.rated_power),
            ("min_rotor_speed", self.min_rotor_speed),
            ("max_rotor_speed", self.max_rotor_speed),
            ("surface.ct_max", self.surface.ct_max),
            ("surface.lambda_opt", self.surface.lambda_opt),
            ("surface.pitch_decay", self.surface.pitch_decay),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::config(format!("turbine.{name}"), "must be positive"));
            }
        }
        let area = std::f64::consts::PI * self.rotor_radius * self.rotor_radius;
        if ((self.rotor_area - area) / area).abs() > 1e-9 {
            return Err(Error::config("turbine.rotor_area", "must equal π r²"));
        }
        if self.min_rotor_speed >= self.max_rotor_speed {
            return Err(Error::config("turbine.min_rotor_speed", "must be below max_rotor_speed"));
        }
        Ok(())
    }
}

fn check_inputs(ct_prime: f64, u: f64) -> Result<()> {
    if !(ct_prime >= 0.0) || !ct_prime.is_finite() {
        return Err(Error::invalid(format!("C_T' must be >= 0, got {ct_prime}")));
    }
    if !(u > 0.0) || !u.is_finite() {
        return Err(Error::invalid(format!("wind speed must be > 0, got {u}")));
    }
    Ok(())
}

/// Axial force `½ρA·C_T'·U²`, N.
pub fn thrust(ct_prime: f64, u: f64, params: &TurbineParams) -> Result<f64> {
    check_inputs(ct_prime, u)?;
    Ok(params.half_rho_a() * ct_prime * u * u)
}

/// Power `½ρA·C_T'·U³`, W.
pub fn power(ct_prime: f64, u: f64, params: &TurbineParams) -> Result<f64> {
    check_inputs(ct_prime, u)?;
    Ok(params.half_rho_a() * ct_prime * u * u * u)
}

/// Thrust coefficient that yields `p_target` at wind `u`, clamped to
/// `[0, ct_max]`. The flag reports whether clamping happened.
pub fn required_ct(p_target: f64, u: f64, params: &TurbineParams) -> Result<(f64, bool)> {
    if !(p_target >= 0.0) || !(u > 0.0) {
        return Err(Error::invalid("required_ct needs p >= 0 and u > 0"));
    }
    let raw = p_target / (params.half_rho_a() * u * u * u);
    let max = params.ct_max();
    if raw > max {
        Ok((max, true))
    } else {
        Ok((raw, false))
    }
}

/// Dynamic state of one turbine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurbineState {
    /// Rotor speed ω_r, rad/s.
    pub rotor_speed: f64,
    /// Pitch β, degrees.
    pub pitch: f64,
    /// Realized C_T'.
    pub ct: f64,
    /// Axial force, N.
    pub force: f64,
    /// Power, W.
    pub power: f64,
    /// Generator torque T_g, N·m.
    pub generator_torque: f64,
    pub torque_integrator: f64,
    pub pitch_integrator: f64,
    /// Last command exceeded what the wind can deliver.
    pub saturated: bool,
}

struct SpeedTarget {
    omega_ref: f64,
    power_limit: f64,
    saturated: bool,
}

fn speed_target(p_command: f64, u: f64, params: &TurbineParams) -> Result<SpeedTarget> {
    let p_target = p_command.min(params.rated_power);
    let (ct_target, saturated) = required_ct(p_target, u, params)?;
    let omega_raw = params.lambda_for(ct_target) * u / params.rotor_radius;
    let pinned_low = omega_raw < params.min_rotor_speed;
    Ok(SpeedTarget {
        omega_ref: omega_raw.clamp(params.min_rotor_speed, params.max_rotor_speed),
        // at the lower speed limit only pitch can shed the excess power
        power_limit: if pinned_low {
            p_target
        } else {
            params.rated_power
        },
        saturated,
    })
}

impl TurbineState {
    /// Steady operating point delivering `p_command` at wind `u`.
    pub fn equilibrium(p_command: f64, u: f64, params: &TurbineParams) -> Result<Self> {
        let target = speed_target(p_command, u, params)?;
        let mut st = TurbineState {
            rotor_speed: target.omega_ref,
            pitch: 0.0,
            ct: 0.0,
            force: 0.0,
            power: 0.0,
            generator_torque: 0.0,
            torque_integrator: 0.0,
            pitch_integrator: 0.0,
            saturated: target.saturated,
        };
        st.observe(u, params)?;
        st.generator_torque = st.power / st.rotor_speed / params.gearbox_ratio;
        st.torque_integrator = st.generator_torque - params.speed_kp * st.rotor_speed;
        Ok(st)
    }

    /// Re-evaluates C_T', F and P for the current rotor state at wind `u`.
    pub fn observe(&mut self, u: f64, params: &TurbineParams) -> Result<()> {
        if !(u > 0.0) {
            return Err(Error::invalid("wind speed must be > 0"));
        }
        let lambda = self.rotor_speed * params.rotor_radius / u;
        self.ct = params.ct(lambda, self.pitch);
        self.force = thrust(self.ct, u, params)?;
        self.power = power(self.ct, u, params)?;
        Ok(())
    }

    /// Ideal-actuator state: C_T' is a filtered copy of the command.
    pub fn ideal(ct: f64, u: f64, params: &TurbineParams) -> Result<Self> {
        Ok(TurbineState {
            rotor_speed: params.min_rotor_speed,
            pitch: 0.0,
            ct,
            force: thrust(ct, u, params)?,
            power: power(ct, u, params)?,
            generator_torque: 0.0,
            torque_integrator: 0.0,
            pitch_integrator: 0.0,
            saturated: false,
        })
    }

    fn check(&self, params: &TurbineParams) -> Result<()> {
        let ok = self.rotor_speed >= params.min_rotor_speed
            && self.rotor_speed <= params.max_rotor_speed
            && self.pitch >= 0.0
            && self.ct >= 0.0
            && self.ct <= params.ct_max()
            && self.force >= 0.0
            && self.power >= 0.0
            && [self.generator_torque, self.torque_integrator, self.pitch_integrator]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Internal(format!("turbine state out of bounds: {self:?}")))
        }
    }
}

/// Advances the speed/pitch servo by `dt` seconds at constant wind `u`.
pub fn step_servo(
    state: &TurbineState,
    p_command: f64,
    u: f64,
    dt: f64,
    params: &TurbineParams,
) -> Result<TurbineState> {
    if !(dt > 0.0) || !(p_command >= 0.0) {
        return Err(Error::invalid("servo step needs dt > 0 and p_command >= 0"));
    }
    let target = speed_target(p_command, u, params)?;
    let substeps = (dt * SUBSTEPS_PER_SECOND).ceil().max(1.0) as usize;
    let h = dt / substeps as f64;
    let lag = 1.0 - (-h / params.converter_time_constant).exp();
    let k = params.half_rho_a() * u * u * u;
    let mut s = state.clone();
    s.saturated = target.saturated;

    for _ in 0..substeps {
        let lambda = s.rotor_speed * params.rotor_radius / u;
        let p_aero = k * params.ct(lambda, s.pitch);
        let t_aero = p_aero / s.rotor_speed;

        // speed loop; proportional action on the measurement only
        let err = s.rotor_speed - target.omega_ref;
        let t_ref = s.torque_integrator + params.speed_kp * s.rotor_speed;
        if t_ref > 0.0 || err > 0.0 {
            s.torque_integrator += params.speed_ki * err * h;
        }
        s.generator_torque += lag * (t_ref.max(0.0) - s.generator_torque);

        let accel = (t_aero - params.gearbox_ratio * s.generator_torque) / params.inertia;
        s.rotor_speed = (s.rotor_speed + h * accel)
            .clamp(params.min_rotor_speed, params.max_rotor_speed);

        let scale = target.power_limit.max(0.05 * params.rated_power);
        let perr = (p_aero - (1.0 + PITCH_DEADBAND) * target.power_limit) / scale;
        s.pitch_integrator =
            (s.pitch_integrator + params.pitch_ki * perr * h).clamp(0.0, params.max_pitch);
        let beta_cmd = (params.pitch_kp * perr + s.pitch_integrator).clamp(0.0, params.max_pitch);
        let max_move = params.pitch_rate_limit * h;
        s.pitch += (beta_cmd - s.pitch).clamp(-max_move, max_move);
        s.pitch = s.pitch.max(0.0);
    }
    s.observe(u, params)?;
    s.check(params)?;
    Ok(s)
}

/// Ideal actuator: realized C_T' follows the command through the discrete
/// first-order filter `(a_d, b_d)`.
pub fn step_ideal(
    state: &TurbineState,
    p_command: f64,
    u: f64,
    filter: (f64, f64),
    params: &TurbineParams,
) -> Result<TurbineState> {
    let (cmd, saturated) = required_ct(p_command, u, params)?;
    let mut s = state.clone();
    s.ct = (filter.0 * s.ct + filter.1 * cmd).clamp(0.0, params.ct_max());
    s.saturated = saturated;
    s.force = thrust(s.ct, u, params)?;
    s.power = power(s.ct, u, params)?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn force_and_power_examples() {
        let p = TurbineParams::default();
        assert!((p.rotor_area - 12468.98).abs() < 0.01);
        assert_eq!(thrust(0.0, 10.0, &p).unwrap(), 0.0);
        assert!(rel(thrust(1.0, 10.0, &p).unwrap(), 748_139.0) < 1e-6);
        assert!(rel(thrust(2.0, 9.0, &p).unwrap(), 1_211_987.0) < 1e-5);
        assert_eq!(power(0.0, 10.0, &p).unwrap(), 0.0);
        assert!(rel(power(1.0, 10.0, &p).unwrap(), 7_481_390.0) < 1e-6);
        assert!(rel(power(2.0, 9.0, &p).unwrap(), 10_907_881.0) < 1e-5);
        // ½·1.2·π·63² = 7481.3887 W per unit C_T' at 1 m/s
        assert!((thrust(2.0, 9.0, &p).unwrap() - 1_211_984.977).abs() < 1e-3);
        assert!((power(2.0, 9.0, &p).unwrap() - 10_907_864.791).abs() < 1e-3);
        assert!(thrust(-1.0, 10.0, &p).is_err());
        assert!(power(1.0, 0.0, &p).is_err());
    }

    #[test]
    fn surface_examples() {
        assert!((ct_surface(8.0, 0.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((ct_surface(4.0, 0.0).unwrap() - 1.64872).abs() < 1e-5);
        assert!((ct_surface(8.0, 10.0).unwrap() - 0.89866).abs() < 1e-5);
        assert!(ct_surface(-1.0, 0.0).is_err());
    }

    #[test]
    fn surface_shape() {
        let s = CtSurface::default();
        for i in 0..40 {
            let lambda = 0.25 + i as f64 * 0.4;
            for j in 0..30 {
                let beta = j as f64;
                let h = 1e-6;
                assert!(s.eval(lambda, beta + h) - s.eval(lambda, beta) < 0.0);
            }
        }
        for j in 0..20 {
            let beta = j as f64 * 2.0;
            let mut best = (0.0, f64::NEG_INFINITY);
            for i in 0..=4000 {
                let l = i as f64 * 0.005;
                let v = s.eval(l, beta);
                if v > best.1 {
                    best = (l, v);
                }
            }
            assert!((best.0 - 8.0).abs() < 1e-9, "argmax {} at β {beta}", best.0);
        }
    }

    #[test]
    fn required_ct_examples() {
        let p = TurbineParams::default();
        assert_eq!(required_ct(0.0, 10.0, &p).unwrap(), (0.0, false));
        let (c, sat) = required_ct(7_481_390.0, 10.0, &p).unwrap();
        assert!((c - 1.0).abs() < 1e-6 && !sat);
        assert_eq!(required_ct(1e10, 9.0, &p).unwrap(), (2.0, true));
    }

    #[test]
    fn equilibrium_is_a_fixed_point() {
        let p = TurbineParams::default();
        for (pc, u) in [(2.0e6, 9.0), (4.5e6, 11.0), (1.0e6, 6.5)] {
            let s0 = TurbineState::equilibrium(pc, u, &p).unwrap();
            assert!(rel(s0.power, pc) < 1e-9);
            let s1 = step_servo(&s0, s0.power, u, 1.0, &p).unwrap();
            for (a, b) in [
                (s0.rotor_speed, s1.rotor_speed),
                (s0.ct, s1.ct),
                (s0.power, s1.power),
                (s0.force, s1.force),
                (s0.generator_torque, s1.generator_torque),
            ] {
                assert!(rel(b, a) < 1e-9, "{a} -> {b}");
            }
            assert_eq!(s1.pitch, 0.0);
        }
    }

    #[test]
    fn step_response_settles_without_large_overshoot() {
        let p = TurbineParams::default();
        let u = 9.0;
        let mut s = TurbineState::equilibrium(2.0e6, u, &p).unwrap();
        let target = 3.0e6;
        let mut peak: f64 = 0.0;
        let mut trace = Vec::new();
        for _ in 0..60 {
            s = step_servo(&s, target, u, 1.0, &p).unwrap();
            peak = peak.max(s.power);
            trace.push(s.power);
        }
        assert!(peak <= 1.1 * target, "overshoot to {peak}");
        assert!(rel(s.power, target) < 1e-6, "final {}", s.power);
        // rises monotonically up to the first crossing of the target
        let cross = trace.iter().position(|&p| p >= target).unwrap_or(trace.len());
        assert!(trace[..cross].windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn command_above_available_saturates() {
        let p = TurbineParams::default();
        let u = 6.0;
        let mut s = TurbineState::equilibrium(1.0e6, u, &p).unwrap();
        for _ in 0..120 {
            s = step_servo(&s, 10.0e6, u, 1.0, &p).unwrap();
        }
        let avail = power(2.0, u, &p).unwrap();
        assert!(s.saturated);
        assert!(rel(s.power, avail) < 1e-3, "{} vs {avail}", s.power);
    }

    #[test]
    fn rated_power_is_respected() {
        let p = TurbineParams::default();
        let mut s = TurbineState::equilibrium(4.0e6, 9.0, &p).unwrap();
        for _ in 0..120 {
            s = step_servo(&s, 9.0e6, 9.0, 1.0, &p).unwrap();
        }
        assert!(rel(s.power, p.rated_power) < 1e-3);
        // a gust pushes power over rated; pitch brings it back
        for _ in 0..120 {
            s = step_servo(&s, 9.0e6, 11.0, 1.0, &p).unwrap();
        }
        assert!(s.power <= 1.02 * p.rated_power, "{}", s.power);
    }

    #[test]
    fn zero_command_unloads_the_rotor() {
        let p = TurbineParams::default();
        let mut s = TurbineState::equilibrium(3.0e6, 9.0, &p).unwrap();
        for _ in 0..300 {
            s = step_servo(&s, 0.0, 9.0, 1.0, &p).unwrap();
        }
        assert!(s.ct < 1e-3, "ct {}", s.ct);
        assert!(s.force < 1e-3 * thrust(2.0, 9.0, &p).unwrap());
    }

    #[test]
    fn table_surface_matches_grid_and_interpolates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ct.csv");
        std::fs::write(&path, "lambda,0,10\n0,0,0\n4,1.6,0.8\n8,2.0,1.0\n12,1.5,0.7\n").unwrap();
        let t = CtTable::from_csv(&path).unwrap();
        assert_eq!(t.eval(4.0, 0.0), 1.6);
        assert!((t.eval(6.0, 5.0) - 0.5 * (1.2 + 1.5)).abs() < 1e-12);
        assert_eq!(t.eval(100.0, 100.0), 0.7);
        let p = TurbineParams {
            table: Some(t),
            ..Default::default()
        };
        assert_eq!(p.ct_max(), 2.0);
        assert_eq!(p.lambda_peak(), 8.0);
        let l = p.lambda_for(1.0);
        assert!((p.ct(l, 0.0) - 1.0).abs() < 1e-9);

        std::fs::write(&path, "lambda,0,10\n0,0\n").unwrap();
        assert!(CtTable::from_csv(&path).is_err());
    }

    #[test]
    fn params_validation() {
        let mut p = TurbineParams::default();
        assert!(p.validate().is_ok());
        p.rotor_area *= 1.01;
        assert!(p.validate().is_err());
        let mut p = TurbineParams::default();
        p.inertia = 0.0;
        assert!(p.validate().is_err());
    }

    proptest! {
        #[test]
        fn servo_states_respect_physics(
            commands in prop::collection::vec(0.0..8.0e6f64, 1..30),
            winds in prop::collection::vec(5.0..14.0f64, 30),
        ) {
            let p = TurbineParams::default();
            let mut s = TurbineState::equilibrium(2.0e6, winds[0], &p).unwrap();
            for (k, &pc) in commands.iter().enumerate() {
                let u = winds[k];
                s = step_servo(&s, pc, u, 1.0, &p).unwrap();
                prop_assert!(((s.power / s.force) - u).abs() <= 1e-12 * u);
                prop_assert!(s.power <= power(p.ct_max(), u, &p).unwrap() * (1.0 + 1e-12));
                prop_assert!(s.pitch >= 0.0);
            }
        }
    }
}
