//! Receding-horizon active power dispatch.
//!
//! Each control step builds a linear prediction with the wind frozen at its
//! measured value, assembles a convex QP over the commanded `C_T'` of every
//! turbine for `M` steps, solves it and dispatches the power the first
//! predicted step delivers. Decisions are ordered time-major: entry
//! `k·N + i` is turbine `i` at horizon step `k`.

mod objective;
mod prediction;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::{KktResiduals, QpSettings, QpSolver, QpStatus};

pub use objective::{
    assemble_qp, constraint_set, evaluate_baseline_objective, evaluate_objective, ConstraintSet, MpcQp, MpcWeights,
};
pub use prediction::{build_prediction, discretize_filter, PredictionModel};

/// Which objective the controller optimizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerMode {
    /// All four terms with the configured `w` and `s`.
    #[default]
    Proposed,
    /// Tracking plus load rate only (`s = 1`, no command-rate term).
    Baseline,
    /// `w = 0`.
    TrackingOnly,
}

impl ControllerMode {
    pub fn apply(self, weights: MpcWeights) -> MpcWeights {
        match self {
            ControllerMode::Proposed => weights,
            ControllerMode::Baseline => MpcWeights {
                s: 1.0,
                drop_r: true,
                ..weights
            },
            ControllerMode::TrackingOnly => MpcWeights { w: 0.0, ..weights },
        }
    }
}

impl std::str::FromStr for ControllerMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proposed" => Ok(ControllerMode::Proposed),
            "baseline" => Ok(ControllerMode::Baseline),
            "tracking-only" => Ok(ControllerMode::TrackingOnly),
            other => Err(Error::invalid(format!(
                "unknown mode `{other}` (expected proposed, baseline or tracking-only)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Prediction horizon `M`, steps.
    pub horizon: usize,
    /// Command filter time constant `τ`, s.
    pub filter_time_constant: f64,
    pub ct_min: f64,
    pub ct_max: f64,
    /// Largest change of the command per step.
    pub ct_rate: f64,
    /// Correction gains for the `F`, `P` and `Ĉ` channels.
    pub correction: [f64; 3],
    pub weights: MpcWeights,
    pub mode: ControllerMode,
    /// Multiplies the whole objective before solving (W² to MW²).
    pub objective_scale: f64,
    /// Cap each command at the value that yields rated power.
    pub respect_rated_power: bool,
    pub solver: QpSettings,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 10,
            filter_time_constant: 5.0,
            ct_min: 0.1,
            ct_max: 2.0,
            ct_rate: 0.2,
            correction: [0.5; 3],
            weights: MpcWeights::default(),
            mode: ControllerMode::Proposed,
            objective_scale: 1e-12,
            respect_rated_power: true,
            solver: QpSettings::default(),
        }
    }
}

impl MpcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("mpc.horizon", "must be at least 1"));
        }
        if !(self.filter_time_constant >= 0.0) {
            return Err(Error::config("mpc.filter_time_constant", "must be >= 0"));
        }
        if !(self.ct_min >= 0.0) {
            return Err(Error::config("mpc.ct_min", "must be >= 0"));
        }
        if !(self.ct_min < self.ct_max) {
            return Err(Error::config("mpc.ct_min", "must be below ct_max"));
        }
        if !(self.ct_rate > 0.0) {
            return Err(Error::config("mpc.ct_rate", "must be positive"));
        }
        if self.correction.iter().any(|m| !(0.0..=1.0).contains(m)) {
            return Err(Error::config("mpc.correction", "gains must lie in [0, 1]"));
        }
        if !(self.objective_scale > 0.0) {
            return Err(Error::config("mpc.objective_scale", "must be positive"));
        }
        self.weights.validate()?;
        self.solver
            .validate()
            .map_err(|e| Error::config("mpc.solver", e.to_string()))
    }
}

/// Per-turbine measurement fed back to the controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feedback {
    pub force: f64,
    pub power: f64,
    pub ct: f64,
}

/// Solver diagnostics kept for every control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    pub residuals: KktResiduals,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HorizonSolution {
    /// Commanded `C_T'`, `N × M`.
    pub commands: DMatrix<f64>,
    /// Predicted filtered `Ĉ`, `N × M`.
    pub filtered: DMatrix<f64>,
    pub force: DMatrix<f64>,
    pub power: DMatrix<f64>,
    /// Power commands `P*`, W.
    pub dispatch: Vec<f64>,
    pub report: SolveReport,
}

/// `P*_i = ½ρA·Ĉ_i(t₀+1)·U_i³` from the first horizon step only.
pub fn dispatch(pred: &PredictionModel, u: &DVector<f64>) -> Result<Vec<f64>> {
    let n = pred.turbines();
    if u.len() != n * pred.horizon {
        return Err(Error::invalid("decision vector has the wrong length"));
    }
    Ok((0..n)
        .map(|i| {
            let c1 = pred.a * pred.x0[3 * i + 2] + pred.b * u[i];
            pred.power_gain(i) * c1
        })
        .collect())
}

/// Stateful controller: keeps the last command, the last prediction of the
/// next state and a warm start between steps.
pub struct MpcController {
    config: MpcConfig,
    weights: MpcWeights,
    filter: (f64, f64),
    half_rho_a: f64,
    rated_power: f64,
    solver: QpSolver,
    prev_command: Vec<f64>,
    prev_prediction: Option<Vec<f64>>,
    warm: Option<(DVector<f64>, DVector<f64>)>,
}

impl MpcController {
    /// `initial_command` is the command in force before the first step.
    pub fn new(config: MpcConfig, dt: f64, half_rho_a: f64, rated_power: f64, initial_command: &[f64]) -> Result<Self> {
        config.validate()?;
        if initial_command.is_empty() {
            return Err(Error::invalid("controller needs at least one turbine"));
        }
        let filter = discretize_filter(config.filter_time_constant, dt)?;
        let weights = config.mode.apply(config.weights);
        Ok(MpcController {
            solver: QpSolver::new(config.solver)?,
            weights,
            filter,
            half_rho_a,
            rated_power,
            prev_command: initial_command
                .iter()
                .map(|c| c.clamp(config.ct_min, config.ct_max))
                .collect(),
            prev_prediction: None,
            warm: None,
            config,
        })
    }

    pub fn weights(&self) -> &MpcWeights {
        &self.weights
    }

    pub fn previous_command(&self) -> &[f64] {
        &self.prev_command
    }

    /// One receding-horizon step.
    ///
    /// A solve that does not certify leaves the previous command plan in
    /// force (shifted by one step) and is reported through its status.
    pub fn step(&mut self, feedback: &[Feedback], winds: &[f64], p_ref: f64) -> Result<HorizonSolution> {
        let n = self.prev_command.len();
        let m = self.config.horizon;
        if feedback.len() != n || winds.len() != n {
            return Err(Error::invalid(format!(
                "controller built for {n} turbines, got {} measurements and {} winds",
                feedback.len(),
                winds.len()
            )));
        }
        let x0: Vec<f64> = feedback.iter().flat_map(|f| [f.force, f.power, f.ct]).collect();
        let pred = build_prediction(
            &x0,
            winds,
            self.half_rho_a,
            self.filter,
            m,
            self.config.correction,
            self.prev_prediction.as_deref(),
        )?;
        let mut cs = constraint_set(
            &self.prev_command,
            self.config.ct_min,
            self.config.ct_max,
            self.config.ct_rate,
            m,
        )?;
        if self.config.respect_rated_power {
            for i in 0..n {
                cs.cap_turbine(i, self.rated_power / pred.power_gain(i));
            }
        }
        let p_ref_h = vec![p_ref; m];
        let qp = assemble_qp(
            &pred,
            &p_ref_h,
            &self.weights,
            &self.prev_command,
            &cs,
            self.config.objective_scale,
        )?;

        let warm = self.warm.as_ref().map(|(x, y)| {
            let xs = cs.shifted(x);
            let rows = 4 * n;
            let ys = DVector::from_fn(y.len(), |r, _| y[((r / rows) + 1).min(m - 1) * rows + r % rows]);
            (xs, ys)
        });
        let sol = self.solver.solve(&qp.problem, warm.as_ref().map(|(x, y)| (x, y)))?;

        let u = if sol.is_solved() {
            self.warm = Some((sol.x.clone(), sol.duals.clone()));
            sol.x.clone()
        } else {
            self.warm = None;
            fallback_plan(&cs)
        };
        let dispatch = dispatch(&pred, &u)?;
        let xs = pred.predict(&u)?;
        let mut filtered = DMatrix::zeros(n, m);
        let mut force = DMatrix::zeros(n, m);
        let mut power = DMatrix::zeros(n, m);
        for (k, x) in xs.iter().enumerate() {
            for i in 0..n {
                force[(i, k)] = x[3 * i];
                power[(i, k)] = x[3 * i + 1];
                filtered[(i, k)] = x[3 * i + 2];
            }
        }
        self.prev_prediction = Some(xs[0].iter().copied().collect());
        self.prev_command = (0..n).map(|i| u[i]).collect();
        Ok(HorizonSolution {
            commands: DMatrix::from_fn(n, m, |i, k| u[k * n + i]),
            filtered,
            force,
            power,
            dispatch,
            report: SolveReport {
                status: sol.status,
                iterations: sol.iterations,
                polished: sol.polished,
                residuals: sol.residuals,
                objective: qp.objective(&sol.x),
            },
        })
    }
}

/// Feasible plan that moves each command as little as the bounds allow.
fn fallback_plan(cs: &ConstraintSet) -> DVector<f64> {
    let n = cs.turbines;
    let mut u = DVector::zeros(n * cs.horizon);
    for i in 0..n {
        let mut last = cs.prev[i];
        for k in 0..cs.horizon {
            let idx = k * n + i;
            let lo = (last - cs.rate).max(cs.lower[idx]);
            let hi = (last + cs.rate).min(cs.upper[idx]);
            last = last.clamp(lo, hi);
            u[idx] = last;
        }
    }
    u
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qp::solve;
    use crate::turbine::{power, thrust, TurbineParams};

    const K: f64 = 7481.388745258733;

    fn steady_feedback(ct: f64, u: f64) -> Feedback {
        Feedback {
            force: K * u * u * ct,
            power: K * u * u * u * ct,
            ct,
        }
    }

    #[test]
    fn dispatch_examples() {
        let f = (0.0, 1.0);
        let pred = build_prediction(&[0.0, 0.0, 0.5], &[10.0], K, f, 3, [0.0; 3], None).unwrap();
        let u = DVector::from_vec(vec![1.0, 0.3, 1.7]);
        let p = dispatch(&pred, &u).unwrap();
        assert!((p[0] - 7_481_390.0).abs() / 7_481_390.0 < 1e-6);
        let mut later = u.clone();
        later[1] = 2.0;
        later[2] = 0.1;
        assert_eq!(dispatch(&pred, &later).unwrap(), p);
    }

    #[test]
    fn single_turbine_tracking_hits_reference() {
        // tracking only, command limits far away
        let f = discretize_filter(5.0, 1.0).unwrap();
        let fb = steady_feedback(0.8, 9.0);
        let pred = build_prediction(&[fb.force, fb.power, fb.ct], &[9.0], K, f, 4, [0.0; 3], None).unwrap();
        let p_ref = 1.1 * fb.power;
        let weights = MpcWeights { r: 0.0, w: 0.0, ..Default::default() };
        let cs = constraint_set(&[0.8], 0.0, 100.0, 100.0, 4).unwrap();
        let qp = assemble_qp(&pred, &[p_ref; 4], &weights, &[0.8], &cs, 1e-12).unwrap();
        let sol = solve(&qp.problem, &QpSettings::default(), None).unwrap();
        assert!(sol.is_solved());
        let p = dispatch(&pred, &sol.x).unwrap();
        assert!((p[0] - p_ref).abs() / p_ref < 1e-6, "{} vs {p_ref}", p[0]);
    }

    #[test]
    fn baseline_mode_equals_flagged_proposed_mode() {
        let fb = [steady_feedback(0.9, 9.0), steady_feedback(1.1, 7.0)];
        let winds = [9.0, 7.0];
        let target = fb.iter().map(|f| f.power).sum::<f64>() * 1.05;
        let base_cfg = MpcConfig {
            mode: ControllerMode::Baseline,
            ..Default::default()
        };
        let flagged = MpcConfig {
            weights: MpcWeights {
                s: 1.0,
                drop_r: true,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut a = MpcController::new(base_cfg, 1.0, K, 5e6, &[0.9, 1.1]).unwrap();
        let mut b = MpcController::new(flagged, 1.0, K, 5e6, &[0.9, 1.1]).unwrap();
        for _ in 0..5 {
            let sa = a.step(&fb, &winds, target).unwrap();
            let sb = b.step(&fb, &winds, target).unwrap();
            for (x, y) in sa.dispatch.iter().zip(&sb.dispatch) {
                assert!((x - y).abs() <= 1e-6 * x.abs());
            }
        }
    }

    #[test]
    fn closed_loop_with_exact_plant_converges() {
        let params = TurbineParams::default();
        let winds = [9.0, 8.0, 7.5];
        let mut ct = vec![0.8, 0.8, 0.8];
        let (a, b) = discretize_filter(5.0, 1.0).unwrap();
        let mut ctrl = MpcController::new(MpcConfig::default(), 1.0, K, 5e6, &ct).unwrap();
        let target: f64 = winds.iter().map(|u| power(0.9, *u, &params).unwrap()).sum();
        let mut total = 0.0;
        for _ in 0..120 {
            let fb: Vec<Feedback> = ct
                .iter()
                .zip(&winds)
                .map(|(c, u)| Feedback {
                    force: thrust(*c, *u, &params).unwrap(),
                    power: power(*c, *u, &params).unwrap(),
                    ct: *c,
                })
                .collect();
            let sol = ctrl.step(&fb, &winds, target).unwrap();
            assert!(sol.report.residuals.within(1e-6));
            for i in 0..3 {
                let cmd = sol.commands[(i, 0)];
                ct[i] = a * ct[i] + b * cmd;
                assert!((power(ct[i], winds[i], &params).unwrap() - sol.dispatch[i]).abs() < 1e-6);
            }
            total = ct.iter().zip(&winds).map(|(c, u)| power(*c, *u, &params).unwrap()).sum();
        }
        assert!((total - target).abs() / target < 1e-3, "{total} vs {target}");
    }

    #[test]
    fn mode_parsing() {
        assert_eq!("baseline".parse::<ControllerMode>().unwrap(), ControllerMode::Baseline);
        assert!("greedy".parse::<ControllerMode>().is_err());
    }

    #[test]
    fn config_validation_names_fields() {
        let cfg = MpcConfig {
            horizon: 0,
            ..Default::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("horizon"), "{err}");
    }
}
