//! The closed loop: flow field, turbines, frequency block, controller.

use crate::error::{Error, Result};
use crate::freq_control::PowerReference;
use crate::metrics::FatigueReport;
use crate::mpc::{Feedback, MpcController, SolveReport};
use crate::qp::QpStatus;
use crate::turbine::{power, required_ct, step_servo, thrust, TurbineParams, TurbineState};
use crate::wind_field::{steady_speeds, FarmLayout, FlowFieldState};

use super::config::{Fidelity, ScenarioConfig};

/// Everything a run produces. Per-turbine series are `[t][i]`; row `k` holds
/// the state reached at the end of control step `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsBundle {
    /// Resolved scenario, including the seed and mode actually used.
    pub config: ScenarioConfig,
    pub time: Vec<f64>,
    pub freestream: Vec<f64>,
    pub frequency: Vec<f64>,
    pub p_command: Vec<f64>,
    pub p_ref: Vec<f64>,
    pub p_total: Vec<f64>,
    pub power: Vec<Vec<f64>>,
    pub force: Vec<Vec<f64>>,
    pub ct: Vec<Vec<f64>>,
    pub wind: Vec<Vec<f64>>,
    /// Commanded `C_T'` (first horizon step).
    pub command: Vec<Vec<f64>>,
    /// Dispatched power `P*`.
    pub dispatch: Vec<Vec<f64>>,
    pub solver: Vec<SolveReport>,
    pub report: FatigueReport,
    /// Steady greedy farm power under the mean wind, W.
    pub available_power: f64,
    pub failures: usize,
    /// Step at which the failure budget ran out.
    pub aborted_at: Option<usize>,
    pub wake_clamps: usize,
}

impl ResultsBundle {
    pub fn steps(&self) -> usize {
        self.time.len()
    }

    pub fn turbines(&self) -> usize {
        self.power.first().map_or(0, Vec::len)
    }

    /// `Err(Aborted)` when the run stopped early.
    pub fn check(&self) -> Result<()> {
        match self.aborted_at {
            Some(step) => Err(Error::Aborted {
                step,
                failed: self.failures,
                budget: self.config.simulation.failure_budget,
            }),
            None => Ok(()),
        }
    }

    /// Largest KKT residual over all certified solves.
    pub fn worst_residual(&self) -> f64 {
        self.solver.iter().map(|r| r.residuals.max()).fold(0.0, f64::max)
    }
}

/// Steady per-turbine `C_T'` when every turbine asks for `base` but none may
/// exceed rated power. Resolved upstream first, so `N + 1` sweeps converge.
fn rated_limited(layout: &FarmLayout, params: &TurbineParams, base: f64, u_inf: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = layout.len();
    let mut ct = vec![base; n];
    let mut speeds = steady_speeds(layout, &ct, u_inf)?;
    for _ in 0..=n {
        let next: Vec<f64> = speeds
            .iter()
            .map(|&u| base.min(required_ct(params.rated_power, u, params).map_or(base, |r| r.0)))
            .collect();
        if next == ct {
            break;
        }
        ct = next;
        speeds = steady_speeds(layout, &ct, u_inf)?;
    }
    Ok((ct, speeds))
}

fn farm_power(ct: &[f64], speeds: &[f64], params: &TurbineParams) -> Result<f64> {
    ct.iter().zip(speeds).map(|(&c, &u)| power(c, u, params)).sum()
}

/// Steady greedy farm power: every turbine at `ct_max` or rated.
pub fn available_power(layout: &FarmLayout, params: &TurbineParams, ct_max: f64, u_inf: f64) -> Result<f64> {
    let (ct, speeds) = rated_limited(layout, params, ct_max, u_inf)?;
    farm_power(&ct, &speeds, params)
}

/// Uniform `C_T'` (rated-limited) whose steady farm power first reaches
/// `target`; the most productive setting if none does.
pub fn initial_operating_point(
    layout: &FarmLayout,
    params: &TurbineParams,
    ct_range: (f64, f64),
    u_inf: f64,
    target: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (lo, hi) = ct_range;
    let total = |c: f64| -> Result<f64> {
        let (ct, u) = rated_limited(layout, params, c, u_inf)?;
        farm_power(&ct, &u, params)
    };
    const GRID: usize = 200;
    let mut prev = lo;
    if total(lo)? >= target {
        return rated_limited(layout, params, lo, u_inf);
    }
    let mut best = (f64::NEG_INFINITY, lo);
    for k in 1..=GRID {
        let c = lo + (hi - lo) * k as f64 / GRID as f64;
        let p = total(c)?;
        if p >= target {
            let (mut a, mut b) = (prev, c);
            for _ in 0..60 {
                let mid = 0.5 * (a + b);
                if total(mid)? >= target {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            return rated_limited(layout, params, b, u_inf);
        }
        if p > best.0 {
            best = (p, c);
        }
        prev = c;
    }
    rated_limited(layout, params, best.1, u_inf)
}

enum Plant {
    Servo(Vec<TurbineState>),
    Ideal(Vec<f64>),
}

/// Runs one scenario. A run that exhausts its failure budget returns the
/// partial bundle with `aborted_at` set; see [`ResultsBundle::check`].
pub fn run(config: &ScenarioConfig) -> Result<ResultsBundle> {
    config.validate()?;
    let layout = config.layout.build()?;
    let params = config.turbine_params()?;
    let sim = &config.simulation;
    let dt = sim.dt;
    let steps = sim.steps();
    let n = layout.len();
    let wind = config.freestream()?;
    let freq = config.frequency.trace(sim.duration, dt)?;
    let ct_max = config.mpc.ct_max.min(params.ct_max());
    let ct_min = config.mpc.ct_min.min(ct_max);

    let available = available_power(&layout, &params, ct_max, config.wind.mean)?;
    let p0 = config.dispatch.command_at(0.0, available);
    let (ct0, _) = initial_operating_point(&layout, &params, (ct_min, ct_max), wind.at(0), p0)?;
    let mut field = FlowFieldState::steady(&layout, &ct0, wind.at(0), dt)?;
    let speeds0 = field.speeds().to_vec();

    let mut plant = match sim.fidelity {
        Fidelity::Full => Plant::Servo(
            ct0.iter()
                .zip(&speeds0)
                .map(|(&c, &u)| TurbineState::equilibrium(power(c, u, &params)?, u, &params))
                .collect::<Result<_>>()?,
        ),
        Fidelity::Ideal => Plant::Ideal(ct0.clone()),
    };
    let mut realized = match &plant {
        Plant::Servo(s) => s.iter().map(|t| t.ct).collect(),
        Plant::Ideal(c) => c.clone(),
    };

    let mut ctrl = MpcController::new(config.mpc.clone(), dt, params.half_rho_a(), params.rated_power, &realized)?;
    let mut reference = PowerReference::new(config.frequency.params(), config.frequency.nominal, dt)?;

    let mut out = ResultsBundle {
        config: config.clone(),
        time: Vec::with_capacity(steps),
        freestream: Vec::with_capacity(steps),
        frequency: Vec::with_capacity(steps),
        p_command: Vec::with_capacity(steps),
        p_ref: Vec::with_capacity(steps),
        p_total: Vec::with_capacity(steps),
        power: Vec::with_capacity(steps),
        force: Vec::with_capacity(steps),
        ct: Vec::with_capacity(steps),
        wind: Vec::with_capacity(steps),
        command: Vec::with_capacity(steps),
        dispatch: Vec::with_capacity(steps),
        solver: Vec::with_capacity(steps),
        report: FatigueReport {
            df_per_turbine: vec![0.0; n],
            df: 0.0,
            ef_per_turbine: vec![0.0; n],
            ef: 0.0,
            rms_tracking_error: 0.0,
            df_normalized: None,
            ef_normalized: None,
            samples: 0,
        },
        available_power: available,
        failures: 0,
        aborted_at: None,
        wake_clamps: 0,
    };

    let mut feedback = vec![
        Feedback {
            force: 0.0,
            power: 0.0,
            ct: 0.0
        };
        n
    ];
    for k in 0..steps {
        let t = k as f64 * dt;
        let u_inf = wind.at(k);
        let speeds = field.step_field(&realized, u_inf, &layout, dt)?.to_vec();

        match &mut plant {
            Plant::Servo(states) => {
                for (i, s) in states.iter_mut().enumerate() {
                    s.observe(speeds[i], &params)?;
                    feedback[i] = Feedback {
                        force: s.force,
                        power: s.power,
                        ct: s.ct,
                    };
                }
            }
            Plant::Ideal(ct) => {
                for (i, &c) in ct.iter().enumerate() {
                    feedback[i] = Feedback {
                        force: thrust(c, speeds[i], &params)?,
                        power: power(c, speeds[i], &params)?,
                        ct: c,
                    };
                }
            }
        }

        let p_cmd = config.dispatch.command_at(t, available);
        let f = freq.at(k);
        let p_ref = reference.update(p_cmd, f);
        let sol = ctrl.step(&feedback, &speeds, p_ref)?;
        if sol.report.status != QpStatus::Solved {
            out.failures += 1;
        }

        let (mut p_row, mut f_row) = (vec![0.0; n], vec![0.0; n]);
        match &mut plant {
            Plant::Servo(states) => {
                for (i, s) in states.iter_mut().enumerate() {
                    *s = step_servo(s, sol.dispatch[i].max(0.0), speeds[i], dt, &params)?;
                    realized[i] = s.ct;
                    p_row[i] = s.power;
                    f_row[i] = s.force;
                }
            }
            Plant::Ideal(ct) => {
                for i in 0..n {
                    let target = sol.dispatch[i].clamp(0.0, params.rated_power);
                    ct[i] = required_ct(target, speeds[i], &params)?.0.min(ct_max);
                    realized[i] = ct[i];
                    p_row[i] = power(ct[i], speeds[i], &params)?;
                    f_row[i] = thrust(ct[i], speeds[i], &params)?;
                }
            }
        }

        out.time.push(t);
        out.freestream.push(u_inf);
        out.frequency.push(f);
        out.p_command.push(p_cmd);
        out.p_ref.push(p_ref);
        out.p_total.push(p_row.iter().sum());
        out.power.push(p_row);
        out.force.push(f_row);
        out.ct.push(realized.clone());
        out.wind.push(speeds);
        out.command.push(sol.commands.column(0).iter().copied().collect());
        out.dispatch.push(sol.dispatch);
        out.solver.push(sol.report);

        if out.failures > sim.failure_budget {
            out.aborted_at = Some(k);
            break;
        }
    }
    out.wake_clamps = field.clamp_events();
    // a run cut short after its first sample keeps the empty report
    if out.steps() >= 2 {
        out.report = FatigueReport::from_series(&out.force, &out.p_total, &out.p_ref)?;
    }
    Ok(out)
}
