use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::{CsrMatrix, KktResiduals, QpProblem, QpSettings, QpSolution, QpStatus};
use crate::error::{Error, Result};

const RHO_MIN: f64 = 1e-6;
const RHO_MAX: f64 = 1e6;
/// Iterations between penalty updates.
const RHO_INTERVAL: usize = 50;
/// Penalty changes smaller than this factor are not worth a refactorization.
const RHO_TRIGGER: f64 = 5.0;
const POLISH_DELTA: f64 = 1e-7;
const POLISH_REFINE: usize = 5;
/// First polish attempt; later attempts happen at doubling iteration counts.
const POLISH_FIRST: usize = 20;

struct Factor {
    hessian: DMatrix<f64>,
    constraints: CsrMatrix,
    rho: f64,
    sigma: f64,
    chol: Cholesky<f64, Dyn>,
}

/// ADMM solver with a cached factorization of `H + σI + ρGᵀG`.
///
/// The cache is reused when a later problem has the same `H`, `G` and
/// penalty, which is the case for repeated solves with changing `g` and `h`.
pub struct QpSolver {
    settings: QpSettings,
    factor: Option<Factor>,
    factorizations: usize,
}

impl QpSolver {
    pub fn new(settings: QpSettings) -> Result<Self> {
        settings.validate()?;
        Ok(QpSolver {
            settings,
            factor: None,
            factorizations: 0,
        })
    }

    pub fn settings(&self) -> &QpSettings {
        &self.settings
    }

    fn factor(&mut self, p: &QpProblem, rho: f64) -> Result<()> {
        let sigma = self.settings.sigma;
        if let Some(f) = &self.factor {
            if f.rho == rho && f.sigma == sigma && f.hessian == p.hessian && f.constraints == p.constraints {
                return Ok(());
            }
        }
        let mut m = p.hessian.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += sigma;
        }
        p.constraints.add_gram_to(&mut m, rho);
        let chol = Cholesky::new(m)
            .ok_or_else(|| Error::Internal("ADMM system is not positive definite; Hessian is not PSD".into()))?;
        self.factorizations += 1;
        self.factor = Some(Factor {
            hessian: p.hessian.clone(),
            constraints: p.constraints.clone(),
            rho,
            sigma,
            chol,
        });
        Ok(())
    }

    /// Solves `problem`, optionally warm-started from a primal–dual pair.
    pub fn solve(
        &mut self,
        p: &QpProblem,
        warm_start: Option<(&DVector<f64>, &DVector<f64>)>,
    ) -> Result<QpSolution> {
        p.validate()?;
        let s = self.settings;
        let n = p.dim();
        let m = p.num_constraints();
        let g_mat = &p.constraints;
        let (mut x, mut y) = match warm_start {
            Some((x0, y0)) => {
                if x0.len() != n || y0.len() != m {
                    return Err(Error::invalid("warm start has the wrong dimensions"));
                }
                (x0.clone(), y0.map(|v| v.max(0.0)))
            }
            None => (DVector::zeros(n), DVector::zeros(m)),
        };
        let mut z = g_mat.mul_vec(&x).zip_map(&p.bounds, f64::min);
        let mut rho = s.rho;
        let start_factorizations = self.factorizations;
        self.factor(p, rho)?;

        let mut best: Option<(KktResiduals, DVector<f64>, DVector<f64>)> = None;
        let mut polisher: Option<Polisher> = None;
        let mut next_polish = POLISH_FIRST;
        let mut fixed_point_prev = f64::INFINITY;
        let mut status = QpStatus::MaxIterations;
        let mut iterations = s.max_iter;

        for k in 1..=s.max_iter {
            let chol = &self.factor.as_ref().expect("factor present").chol;
            let rhs = s.sigma * &x - &p.gradient + g_mat.tr_mul_vec(&(rho * &z - &y));
            let x_tilde = chol.solve(&rhs);
            let z_tilde = g_mat.mul_vec(&x_tilde);
            let x_next = s.alpha * &x_tilde + (1.0 - s.alpha) * &x;
            let w = s.alpha * &z_tilde + (1.0 - s.alpha) * &z + &y / rho;
            let z_next = w.zip_map(&p.bounds, f64::min);
            let y_next = rho * (&w - &z_next);

            let dx = &x_next - &x;
            let dy = &y_next - &y;
            if cfg!(debug_assertions) {
                // the iteration is an averaged operator on (x, z + y/ρ), so its
                // fixed-point residual cannot grow while ρ is held fixed
                let dv = &w - (&z + &y / rho);
                let fp = s.sigma * dx.norm_squared() + rho * dv.norm_squared();
                let scale = s.sigma * x.norm_squared() + rho * (&z + &y / rho).norm_squared();
                debug_assert!(
                    fp <= fixed_point_prev * (1.0 + 1e-6) + 1e-20 * (1.0 + scale),
                    "ADMM fixed-point residual grew: {fixed_point_prev:e} -> {fp:e}"
                );
                fixed_point_prev = fp;
            }
            x = x_next;
            z = z_next;
            y = y_next;

            if k % s.check_interval != 0 && k != s.max_iter {
                continue;
            }
            let res = KktResiduals::compute(p, &x, &y);
            if best.as_ref().map_or(true, |b| res.max() < b.0.max()) {
                best = Some((res, x.clone(), y.clone()));
            }
            let converged = res.within(s.tol);
            if s.polish && (converged || k >= next_polish || k == s.max_iter) {
                next_polish = 2 * k.max(POLISH_FIRST);
                let pol = match &mut polisher {
                    Some(pol) => pol,
                    None => polisher.insert(Polisher::new(p)?),
                };
                if let Some((xp, yp, rp)) = pol.polish(p, &z, &y) {
                    if rp.within(s.tol) {
                        return Ok(self.finish(p, xp, yp, QpStatus::Solved, k, true, start_factorizations));
                    }
                }
            }
            if converged {
                status = QpStatus::Solved;
                iterations = k;
                break;
            }
            if primal_infeasible(p, &dy, s.infeasibility_tol) {
                status = QpStatus::PrimalInfeasible;
                iterations = k;
                break;
            }
            if s.adaptive_rho && k % RHO_INTERVAL == 0 {
                let new_rho = updated_rho(p, &x, &z, &y, rho);
                if new_rho > RHO_TRIGGER * rho || new_rho < rho / RHO_TRIGGER {
                    rho = new_rho;
                    self.factor(p, rho)?;
                    fixed_point_prev = f64::INFINITY;
                }
            }
        }

        if status == QpStatus::MaxIterations {
            if let Some((_, bx, by)) = best {
                x = bx;
                y = by;
            }
        }
        Ok(self.finish(p, x, y, status, iterations, false, start_factorizations))
    }

    #[allow(clippy::too_many_arguments)]
    fn finish(
        &self,
        p: &QpProblem,
        x: DVector<f64>,
        duals: DVector<f64>,
        status: QpStatus,
        iterations: usize,
        polished: bool,
        start_factorizations: usize,
    ) -> QpSolution {
        let residuals = KktResiduals::compute(p, &x, &duals);
        QpSolution {
            objective: p.objective(&x),
            x,
            duals,
            status,
            iterations,
            residuals,
            polished,
            factorizations: self.factorizations - start_factorizations,
        }
    }
}

fn updated_rho(p: &QpProblem, x: &DVector<f64>, z: &DVector<f64>, y: &DVector<f64>, rho: f64) -> f64 {
    let gx = p.constraints.mul_vec(x);
    let hx = &p.hessian * x;
    let gty = p.constraints.tr_mul_vec(y);
    let prim = (&gx - z).amax();
    let dual = (&hx + &p.gradient + &gty).amax();
    let prim_norm = gx.amax().max(z.amax()).max(1e-12);
    let dual_norm = hx.amax().max(gty.amax()).max(p.gradient.amax()).max(1e-12);
    let ratio = ((prim / prim_norm) / (dual / dual_norm).max(1e-30)).sqrt();
    if !ratio.is_finite() || ratio == 0.0 {
        return rho;
    }
    (rho * ratio).clamp(RHO_MIN, RHO_MAX)
}

/// Farkas certificate: `δy ≥ 0`, `Gᵀδy ≈ 0`, `hᵀδy < 0`.
fn primal_infeasible(p: &QpProblem, dy: &DVector<f64>, eps: f64) -> bool {
    let norm = dy.amax();
    if norm < 1e-12 {
        return false;
    }
    if dy.min() < -eps * norm {
        return false;
    }
    let gt = p.constraints.tr_mul_vec(dy);
    let support: f64 = p
        .bounds
        .iter()
        .zip(dy.iter())
        .filter(|(_, d)| **d > 0.0)
        .map(|(h, d)| h * d)
        .sum();
    gt.amax() <= eps * norm && support < -eps * norm
}

/// Equality-constrained re-solve on a guessed active set.
struct Polisher {
    chol: Cholesky<f64, Dyn>,
}

impl Polisher {
    fn new(p: &QpProblem) -> Result<Self> {
        let mut k = p.hessian.clone();
        for i in 0..k.nrows() {
            k[(i, i)] += POLISH_DELTA;
        }
        let chol = Cholesky::new(k)
            .ok_or_else(|| Error::Internal("polish system is not positive definite".into()))?;
        Ok(Polisher { chol })
    }

    fn polish(
        &self,
        p: &QpProblem,
        z: &DVector<f64>,
        y: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>, KktResiduals)> {
        let active: Vec<usize> = (0..p.num_constraints())
            .filter(|&i| p.bounds[i] - z[i] < y[i])
            .collect();
        let gt_a = p.constraints.rows_transposed(&active);
        let h_a = DVector::from_iterator(active.len(), active.iter().map(|&i| p.bounds[i]));

        let mut w = gt_a.clone();
        if !self.chol.l_dirty().solve_lower_triangular_mut(&mut w) {
            return None;
        }
        let mut schur = w.transpose() * &w;
        for i in 0..schur.nrows() {
            schur[(i, i)] += POLISH_DELTA;
        }
        let schur = Cholesky::new(schur)?;

        let solve_reg = |r1: &DVector<f64>, r2: &DVector<f64>| {
            let t = self.chol.solve(r1);
            let ya = schur.solve(&(gt_a.tr_mul(&t) - r2));
            let xa = self.chol.solve(&(r1 - &gt_a * &ya));
            (xa, ya)
        };
        let r1 = -&p.gradient;
        let (mut xp, mut ya) = solve_reg(&r1, &h_a);
        for _ in 0..POLISH_REFINE {
            let e1 = &r1 - (&p.hessian * &xp + &gt_a * &ya);
            let e2 = &h_a - gt_a.tr_mul(&xp);
            if e1.amax().max(e2.amax()) < 1e-14 {
                break;
            }
            let (dx, dy) = solve_reg(&e1, &e2);
            xp += dx;
            ya += dy;
        }
        let mut yp = DVector::zeros(p.num_constraints());
        for (c, &i) in active.iter().enumerate() {
            yp[i] = ya[c];
        }
        if !xp.iter().chain(yp.iter()).all(|v| v.is_finite()) {
            return None;
        }
        let r = KktResiduals::compute(p, &xp, &yp);
        Some((xp, yp, r))
    }
}
