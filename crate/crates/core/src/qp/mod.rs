//! Convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//! minimize ½xᵀHx + gᵀx   subject to   Gx ≤ h
//! ```
//!
//! with `H` symmetric positive semidefinite. [`QpSolver`] runs an
//! operator-splitting (ADMM) iteration with over-relaxation and adaptive
//! penalty, then polishes the result on the guessed active set. A solution is
//! reported as solved only when all four KKT residuals are within tolerance.

mod admm;
mod io;
mod sparse;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use admm::QpSolver;
pub use io::{read_problem, write_problem};
pub use sparse::CsrMatrix;

/// `min ½xᵀHx + gᵀx  s.t.  Gx ≤ h`.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub hessian: DMatrix<f64>,
    pub gradient: DVector<f64>,
    pub constraints: CsrMatrix,
    pub bounds: DVector<f64>,
}

impl QpProblem {
    pub fn new(
        hessian: DMatrix<f64>,
        gradient: DVector<f64>,
        constraints: CsrMatrix,
        bounds: DVector<f64>,
    ) -> Result<Self> {
        let p = QpProblem {
            hessian,
            gradient,
            constraints,
            bounds,
        };
        p.validate()?;
        Ok(p)
    }

    /// Adds `lo ≤ x ≤ hi` as two rows per variable.
    pub fn with_box(mut self, lo: &[f64], hi: &[f64]) -> Result<Self> {
        let n = self.dim();
        if lo.len() != n || hi.len() != n {
            return Err(Error::invalid("box bounds must match the variable count"));
        }
        let mut rows: Vec<f64> = self.bounds.iter().copied().collect();
        for j in 0..n {
            self.constraints.push_row(&[(j, 1.0)]);
            rows.push(hi[j]);
            self.constraints.push_row(&[(j, -1.0)]);
            rows.push(-lo[j]);
        }
        self.bounds = DVector::from_vec(rows);
        self.validate()?;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.bounds.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.gradient.len();
        if self.hessian.nrows() != n || self.hessian.ncols() != n {
            return Err(Error::invalid(format!(
                "Hessian is {}x{}, gradient has {n} entries",
                self.hessian.nrows(),
                self.hessian.ncols()
            )));
        }
        if self.constraints.ncols() != n || self.constraints.nrows() != self.bounds.len() {
            return Err(Error::invalid("constraint matrix and bounds have inconsistent sizes"));
        }
        let finite = self.hessian.iter().all(|v| v.is_finite())
            && self.gradient.iter().all(|v| v.is_finite())
            && self.constraints.values().iter().all(|v| v.is_finite())
            && self.bounds.iter().all(|v| !v.is_nan() && *v != f64::NEG_INFINITY);
        if !finite {
            return Err(Error::invalid("problem data contains non-finite values"));
        }
        let scale = self.hessian.amax().max(1.0);
        let asym = (&self.hessian - self.hessian.transpose()).amax();
        if asym > 1e-10 * scale {
            return Err(Error::invalid(format!("Hessian asymmetric by {asym:e}")));
        }
        Ok(())
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.hessian * x)) + self.gradient.dot(x)
    }
}

/// ∞-norm KKT residuals of a primal–dual pair.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KktResiduals {
    /// `‖Hx + g + Gᵀν‖∞`
    pub stationarity: f64,
    /// `‖max(Gx − h, 0)‖∞`
    pub primal: f64,
    /// `‖min(ν, 0)‖∞`
    pub dual: f64,
    /// `‖ν ⊙ (Gx − h)‖∞`
    pub complementarity: f64,
}

impl KktResiduals {
    pub fn compute(problem: &QpProblem, x: &DVector<f64>, duals: &DVector<f64>) -> Self {
        let stat = &problem.hessian * x + &problem.gradient + problem.constraints.tr_mul_vec(duals);
        let slack = problem.constraints.mul_vec(x) - &problem.bounds;
        let mut r = KktResiduals {
            stationarity: stat.amax(),
            ..Default::default()
        };
        for (s, nu) in slack.iter().zip(duals.iter()) {
            r.primal = r.primal.max(s.max(0.0));
            r.dual = r.dual.max((-nu).max(0.0));
            if s.is_finite() {
                r.complementarity = r.complementarity.max((nu * s).abs());
            }
        }
        r
    }

    pub fn max(&self) -> f64 {
        self.stationarity
            .max(self.primal)
            .max(self.dual)
            .max(self.complementarity)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// Recomputes the residuals reported by a solution.
pub fn kkt_residuals(problem: &QpProblem, solution: &QpSolution) -> KktResiduals {
    KktResiduals::compute(problem, &solution.x, &solution.duals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QpStatus {
    Solved,
    /// Iteration limit hit; the solution carries the best iterate seen.
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of `Gx ≤ h`, nonnegative at optimality.
    pub duals: DVector<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub residuals: KktResiduals,
    pub objective: f64,
    /// Final answer came from the active-set polish.
    pub polished: bool,
    /// Number of factorizations performed.
    pub factorizations: usize,
}

impl QpSolution {
    pub fn is_solved(&self) -> bool {
        self.status == QpStatus::Solved
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpSettings {
    /// Absolute ∞-norm tolerance on every KKT residual.
    pub tol: f64,
    pub max_iter: usize,
    /// Initial penalty ρ.
    pub rho: f64,
    /// Proximal term σ keeping the linear system definite.
    pub sigma: f64,
    /// Over-relaxation α ∈ (0, 2).
    pub alpha: f64,
    pub adaptive_rho: bool,
    /// Iterations between convergence and infeasibility checks.
    pub check_interval: usize,
    pub polish: bool,
    pub infeasibility_tol: f64,
}

impl Default for QpSettings {
    fn default() -> Self {
        QpSettings {
            tol: 1e-6,
            max_iter: 4000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho: true,
            check_interval: 10,
            polish: true,
            infeasibility_tol: 1e-6,
        }
    }
}

impl QpSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::invalid("solver tolerance must be positive"));
        }
        if !(self.rho > 0.0) || !(self.sigma > 0.0) {
            return Err(Error::invalid("rho and sigma must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha < 2.0) {
            return Err(Error::invalid("relaxation alpha must lie in (0, 2)"));
        }
        if self.max_iter == 0 || self.check_interval == 0 {
            return Err(Error::invalid("max_iter and check_interval must be positive"));
        }
        Ok(())
    }
}

/// Solves with default settings and a fresh solver.
pub fn solve(
    problem: &QpProblem,
    settings: &QpSettings,
    warm_start: Option<(&DVector<f64>, &DVector<f64>)>,
) -> Result<QpSolution> {
    QpSolver::new(*settings)?.solve(problem, warm_start)
}
