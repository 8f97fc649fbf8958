use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::prediction::PredictionModel;
use crate::error::{Error, Result};
use crate::qp::{CsrMatrix, QpProblem};

/// Objective weights.
///
/// The four terms are tracking `Q·(P_ref − ΣP)²`, command rate `r·Δu²`, load
/// rate `w·s·ΔF²` and load imbalance `w·(1−s)·s2_scale·(F − F̄)²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcWeights {
    pub q: f64,
    pub r: f64,
    pub w: f64,
    pub s: f64,
    pub s2_scale: f64,
    /// Leave out the command-rate term.
    pub drop_r: bool,
}

impl Default for MpcWeights {
    fn default() -> Self {
        MpcWeights {
            q: 1.0,
            r: 1e12,
            w: 1e3,
            s: 0.5,
            s2_scale: 1e-2,
            drop_r: false,
        }
    }
}

impl MpcWeights {
    pub fn validate(&self) -> Result<()> {
        if !(self.q >= 0.0) {
            return Err(Error::config("mpc.weights.q", "must be >= 0"));
        }
        if !(self.r >= 0.0) {
            return Err(Error::config("mpc.weights.r", "must be >= 0"));
        }
        if !(self.w >= 0.0) {
            return Err(Error::config("mpc.weights.w", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.s) {
            return Err(Error::config("mpc.weights.s", "must lie in [0, 1]"));
        }
        if !(self.s2_scale >= 0.0) {
            return Err(Error::config("mpc.weights.s2_scale", "must be >= 0"));
        }
        Ok(())
    }

    /// Diagonal weight of the load-rate term.
    pub fn s1(&self) -> f64 {
        self.s
    }

    /// Diagonal weight of the equalization term.
    pub fn s2(&self) -> f64 {
        (1.0 - self.s) * self.s2_scale
    }

    fn r_effective(&self) -> f64 {
        if self.drop_r {
            0.0
        } else {
            self.r
        }
    }
}

/// Bounds on the commanded `C_T'` over the horizon, time-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub turbines: usize,
    pub horizon: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub prev: Vec<f64>,
    pub rate: f64,
}

/// Box and rate limits around the previously applied command.
pub fn constraint_set(prev: &[f64], ct_min: f64, ct_max: f64, rate: f64, horizon: usize) -> Result<ConstraintSet> {
    if !(ct_min < ct_max) {
        return Err(Error::invalid("C_T' lower bound must be below the upper bound"));
    }
    if !(rate > 0.0) {
        return Err(Error::invalid("C_T' rate limit must be positive"));
    }
    if horizon == 0 || prev.is_empty() {
        return Err(Error::invalid("constraint set needs turbines and a horizon"));
    }
    let n = prev.len();
    Ok(ConstraintSet {
        turbines: n,
        horizon,
        lower: vec![ct_min; n * horizon],
        upper: vec![ct_max; n * horizon],
        prev: prev.iter().map(|p| p.clamp(ct_min, ct_max)).collect(),
        rate,
    })
}

impl ConstraintSet {
    /// Tightens the upper bound of turbine `i` towards `ct_cap` while keeping
    /// a descending path from the previous command feasible.
    pub fn cap_turbine(&mut self, i: usize, ct_cap: f64) {
        for k in 0..self.horizon {
            let idx = k * self.turbines + i;
            let reachable_floor = self.prev[i] - (k + 1) as f64 * self.rate;
            self.upper[idx] = ct_cap.max(reachable_floor).clamp(self.lower[idx], self.upper[idx]);
        }
    }

    /// Interval reachable by `u_i(k)` under all limits.
    pub fn window(&self, k: usize, i: usize) -> (f64, f64) {
        let mut lo = self.prev[i];
        let mut hi = self.prev[i];
        for j in 0..=k {
            let idx = j * self.turbines + i;
            lo = (lo - self.rate).max(self.lower[idx]);
            hi = (hi + self.rate).min(self.upper[idx]);
        }
        (lo, hi)
    }

    pub fn num_rows(&self) -> usize {
        4 * self.turbines * self.horizon
    }

    /// `G·u ≤ h`. Four rows per decision, time-major: upper box, lower box,
    /// rate up, rate down.
    pub fn rows(&self) -> (CsrMatrix, DVector<f64>) {
        let n = self.turbines;
        let nv = n * self.horizon;
        let mut g = CsrMatrix::new(nv);
        let mut h = Vec::with_capacity(4 * nv);
        for k in 0..self.horizon {
            for i in 0..n {
                let idx = k * n + i;
                g.push_row(&[(idx, 1.0)]);
                h.push(self.upper[idx]);
                g.push_row(&[(idx, -1.0)]);
                h.push(-self.lower[idx]);
                if k == 0 {
                    g.push_row(&[(idx, 1.0)]);
                    h.push(self.prev[i] + self.rate);
                    g.push_row(&[(idx, -1.0)]);
                    h.push(self.rate - self.prev[i]);
                } else {
                    let before = idx - n;
                    g.push_row(&[(idx, 1.0), (before, -1.0)]);
                    h.push(self.rate);
                    g.push_row(&[(idx, -1.0), (before, 1.0)]);
                    h.push(self.rate);
                }
            }
        }
        (g, DVector::from_vec(h))
    }

    /// Shifts a previous horizon plan one step and repeats its last block.
    pub fn shifted(&self, plan: &DVector<f64>) -> DVector<f64> {
        let n = self.turbines;
        let m = self.horizon;
        DVector::from_fn(n * m, |r, _| plan[((r / n) + 1).min(m - 1) * n + r % n])
    }
}

/// QP for one control step plus what is needed to recover the unscaled
/// objective.
#[derive(Debug, Clone)]
pub struct MpcQp {
    pub problem: QpProblem,
    /// Constant dropped from the quadratic form, in scaled units.
    pub constant: f64,
    /// Factor applied to every term before solving.
    pub scale: f64,
}

impl MpcQp {
    /// Objective in original units at decision `u`.
    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        (self.problem.objective(u) + self.constant) / self.scale
    }
}

/// Assembles the horizon QP.
///
/// Works per turbine on `M × M` blocks; the farm-wide couplings (tracking and
/// equalization) are rank-structured Kronecker products.
pub fn assemble_qp(
    pred: &PredictionModel,
    p_ref: &[f64],
    weights: &MpcWeights,
    prev_ct: &[f64],
    constraints: &ConstraintSet,
    scale: f64,
) -> Result<MpcQp> {
    let n = pred.turbines();
    let m = pred.horizon;
    if p_ref.len() != m {
        return Err(Error::invalid(format!("P_ref horizon has {} entries, expected {m}", p_ref.len())));
    }
    if prev_ct.len() != n || constraints.turbines != n || constraints.horizon != m {
        return Err(Error::invalid("assembly inputs disagree on farm size or horizon"));
    }
    if p_ref.iter().any(|p| !p.is_finite()) {
        return Err(Error::invalid("P_ref is not finite"));
    }
    if !(scale > 0.0) {
        return Err(Error::invalid("objective scale must be positive"));
    }
    weights.validate()?;

    let l = pred.response_matrix();
    let mut d = DMatrix::<f64>::identity(m, m);
    for k in 1..m {
        d[(k, k - 1)] = -1.0;
    }
    let e = &d * &l;
    let ltl = l.tr_mul(&l);
    let dtd = d.tr_mul(&d);
    let ete = e.tr_mul(&e);

    let kf: Vec<f64> = (0..n).map(|i| pred.force_gain(i)).collect();
    let kp: Vec<f64> = (0..n).map(|i| pred.power_gain(i)).collect();
    let q = weights.q;
    let r = weights.r_effective();
    let w1 = weights.w * weights.s1();
    let w2 = weights.w * weights.s2();
    let nf = n as f64;

    // coupling across turbines of the LᵀL-shaped terms
    let cross = DMatrix::from_fn(n, n, |i, j| {
        let centering = if i == j { 1.0 - 1.0 / nf } else { -1.0 / nf };
        2.0 * (q * kp[i] * kp[j] + w2 * kf[i] * kf[j] * centering)
    });

    let nv = n * m;
    let mut hess = DMatrix::zeros(nv, nv);
    for j in 0..m {
        for jj in 0..m {
            let lt = ltl[(j, jj)];
            for i in 0..n {
                let row = j * n + i;
                for ii in 0..n {
                    hess[(row, jj * n + ii)] = scale * lt * cross[(i, ii)];
                }
                hess[(row, jj * n + i)] += scale * 2.0 * (r * dtd[(j, jj)] + w1 * kf[i] * kf[i] * ete[(j, jj)]);
            }
        }
    }

    // affine parts of the predicted trajectories
    let mut force_free = Vec::with_capacity(n);
    let mut power_free_sum = DVector::zeros(m);
    for i in 0..n {
        let c = pred.free_ct(i);
        let mut f = kf[i] * &c;
        let mut p = kp[i] * &c;
        f[0] += pred.correction[3 * i];
        p[0] += pred.correction[3 * i + 1];
        power_free_sum += p;
        force_free.push(f);
    }
    let track_err = DVector::from_fn(m, |k, _| p_ref[k] - power_free_sum[k]);
    let lt_err = l.tr_mul(&track_err);

    let mut grad = DVector::zeros(nv);
    let mut constant = q * track_err.norm_squared();
    for i in 0..n {
        let mut psi = &d * &force_free[i];
        psi[0] -= pred.x0[3 * i];
        let et_psi = e.tr_mul(&psi);
        constant += w1 * psi.norm_squared();
        for j in 0..m {
            let idx = j * n + i;
            grad[idx] += -2.0 * q * kp[i] * lt_err[j] + 2.0 * w1 * kf[i] * et_psi[j];
        }
        grad[i] += -2.0 * r * prev_ct[i];
        constant += r * prev_ct[i] * prev_ct[i];
    }
    if w2 > 0.0 {
        for k in 0..m {
            let mean = force_free.iter().map(|f| f[k]).sum::<f64>() / nf;
            for i in 0..n {
                let centered = force_free[i][k] - mean;
                constant += w2 * centered * centered;
                for j in 0..=k {
                    grad[j * n + i] += 2.0 * w2 * kf[i] * l[(k, j)] * centered;
                }
            }
        }
    }
    grad *= scale;
    constant *= scale;

    for i in 0..nv {
        if hess[(i, i)] < 0.0 {
            return Err(Error::Internal(format!("assembled Hessian has negative diagonal at {i}")));
        }
    }
    let (g_rows, h_rows) = constraints.rows();
    let problem = QpProblem::new(hess, grad, g_rows, h_rows)
        .map_err(|e| Error::Internal(format!("assembled QP is malformed: {e}")))?;
    Ok(MpcQp {
        problem,
        constant,
        scale,
    })
}

/// Direct evaluation of the four-term objective from the predicted
/// trajectories. Independent of the quadratic-form assembly.
pub fn evaluate_objective(
    pred: &PredictionModel,
    p_ref: &[f64],
    weights: &MpcWeights,
    prev_ct: &[f64],
    u: &DVector<f64>,
) -> Result<f64> {
    let n = pred.turbines();
    let xs = pred.predict(u)?;
    let mut total = 0.0;
    let mut prev_u: Vec<f64> = prev_ct.to_vec();
    let mut prev_f: Vec<f64> = (0..n).map(|i| pred.x0[3 * i]).collect();
    for (k, x) in xs.iter().enumerate() {
        let p_sum: f64 = (0..n).map(|i| x[3 * i + 1]).sum();
        total += weights.q * (p_ref[k] - p_sum).powi(2);
        let f: Vec<f64> = (0..n).map(|i| x[3 * i]).collect();
        let mean = f.iter().sum::<f64>() / n as f64;
        for i in 0..n {
            let uk = u[k * n + i];
            total += weights.r_effective() * (uk - prev_u[i]).powi(2);
            total += weights.w * weights.s1() * (f[i] - prev_f[i]).powi(2);
            total += weights.w * weights.s2() * (f[i] - mean).powi(2);
            prev_u[i] = uk;
        }
        prev_f = f;
    }
    Ok(total)
}

/// Tracking plus load-rate objective with a plain load-rate weight, as used
/// by the comparison controller.
pub fn evaluate_baseline_objective(pred: &PredictionModel, p_ref: &[f64], w: f64, u: &DVector<f64>) -> Result<f64> {
    let n = pred.turbines();
    let xs = pred.predict(u)?;
    let mut total = 0.0;
    let mut prev_f: Vec<f64> = (0..n).map(|i| pred.x0[3 * i]).collect();
    for (k, x) in xs.iter().enumerate() {
        let p_sum: f64 = (0..n).map(|i| x[3 * i + 1]).sum();
        total += (p_ref[k] - p_sum).powi(2);
        for (i, pf) in prev_f.iter_mut().enumerate() {
            total += w * (x[3 * i] - *pf).powi(2);
            *pf = x[3 * i];
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::prediction::{build_prediction, discretize_filter};
    use crate::qp::{solve, QpSettings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const K: f64 = 7481.388745258733;

    fn instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (PredictionModel, Vec<f64>, Vec<f64>, ConstraintSet) {
        let f = discretize_filter(5.0, 1.0).unwrap();
        let winds: Vec<f64> = (0..n).map(|_| rng.random_range(6.0..10.0)).collect();
        let mut x0 = Vec::new();
        for &u in &winds {
            let c = rng.random_range(0.3..1.5);
            x0.extend([K * u * u * c, K * u * u * u * c, c]);
        }
        let prev_pred: Vec<f64> = x0.iter().map(|v| v * rng.random_range(0.95..1.05)).collect();
        let pred = build_prediction(&x0, &winds, K, f, m, [0.5; 3], Some(&prev_pred)).unwrap();
        let prev: Vec<f64> = (0..n).map(|i| x0[3 * i + 2]).collect();
        let total: f64 = (0..n).map(|i| x0[3 * i + 1]).sum();
        let p_ref = vec![total * rng.random_range(0.9..1.1); m];
        let cs = constraint_set(&prev, 0.1, 2.0, 0.2, m).unwrap();
        (pred, p_ref, prev, cs)
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn quadratic_form_matches_direct_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for case in 0..30 {
            let (pred, p_ref, prev, cs) = instance(&mut rng, 3, 4);
            let weights = MpcWeights {
                w: rng.random_range(0.0..1e4),
                s: rng.random_range(0.0..1.0),
                ..Default::default()
            };
            let qp = assemble_qp(&pred, &p_ref, &weights, &prev, &cs, 1e-12).unwrap();
            for _ in 0..5 {
                let u = DVector::from_fn(12, |_, _| rng.random_range(0.1..2.0));
                let direct = evaluate_objective(&pred, &p_ref, &weights, &prev, &u).unwrap();
                assert!(rel(qp.objective(&u), direct) < 1e-9, "case {case}");
            }
        }
    }

    #[test]
    fn s_one_is_baseline_plus_rate_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (pred, p_ref, prev, cs) = instance(&mut rng, 4, 5);
        let w = 1e3;
        let full = MpcWeights { w, s: 1.0, ..Default::default() };
        let dropped = MpcWeights { drop_r: true, ..full };
        let qp_full = assemble_qp(&pred, &p_ref, &full, &prev, &cs, 1e-12).unwrap();
        let qp_drop = assemble_qp(&pred, &p_ref, &dropped, &prev, &cs, 1e-12).unwrap();
        for _ in 0..100 {
            let u = DVector::from_fn(20, |_, _| rng.random_range(0.1..2.0));
            let base = evaluate_baseline_objective(&pred, &p_ref, w, &u).unwrap();
            let mut rate = 0.0;
            for k in 0..5 {
                for i in 0..4 {
                    let before = if k == 0 { prev[i] } else { u[(k - 1) * 4 + i] };
                    rate += full.r * (u[k * 4 + i] - before).powi(2);
                }
            }
            assert!(rel(qp_drop.objective(&u), base) < 1e-9);
            assert!(rel(qp_full.objective(&u), base + rate) < 1e-9);
        }
    }

    #[test]
    fn w_zero_leaves_tracking_and_rate_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (pred, p_ref, prev, cs) = instance(&mut rng, 3, 3);
        let w0 = MpcWeights { w: 0.0, ..Default::default() };
        let qp = assemble_qp(&pred, &p_ref, &w0, &prev, &cs, 1e-12).unwrap();
        let tracking_only = MpcWeights { w: 0.0, r: 0.0, ..Default::default() };
        let rate_only = MpcWeights { w: 0.0, q: 0.0, ..Default::default() };
        let a = assemble_qp(&pred, &p_ref, &tracking_only, &prev, &cs, 1e-12).unwrap();
        let b = assemble_qp(&pred, &p_ref, &rate_only, &prev, &cs, 1e-12).unwrap();
        let sum = &a.problem.hessian + &b.problem.hessian;
        assert!((&qp.problem.hessian - sum).amax() <= 1e-12 * qp.problem.hessian.amax());
    }

    #[test]
    fn hessian_is_symmetric_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (pred, p_ref, prev, cs) = instance(&mut rng, 4, 4);
        let qp = assemble_qp(&pred, &p_ref, &MpcWeights::default(), &prev, &cs, 1e-12).unwrap();
        let h = &qp.problem.hessian;
        assert_eq!(h, &h.transpose());
        assert!(h.clone().symmetric_eigenvalues().min() > -1e-9 * h.amax());
    }

    #[test]
    fn argmin_invariant_to_weight_scaling() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (pred, p_ref, prev, cs) = instance(&mut rng, 3, 4);
        let w = MpcWeights { w: 500.0, s: 0.6, ..Default::default() };
        let c = 7.0;
        let scaled = MpcWeights { q: w.q * c, r: w.r * c, w: w.w * c, ..w };
        let a = assemble_qp(&pred, &p_ref, &w, &prev, &cs, 1e-12).unwrap();
        let b = assemble_qp(&pred, &p_ref, &scaled, &prev, &cs, 1e-12).unwrap();
        let sa = solve(&a.problem, &QpSettings::default(), None).unwrap();
        let sb = solve(&b.problem, &QpSettings::default(), None).unwrap();
        assert!(sa.is_solved() && sb.is_solved());
        assert!((&sa.x - &sb.x).amax() < 1e-5);
    }

    #[test]
    fn constraint_examples() {
        let cs = constraint_set(&[1.0], 0.1, 2.0, 0.2, 3).unwrap();
        let (lo, hi) = cs.window(0, 0);
        assert!((lo - 0.8).abs() < 1e-12 && (hi - 1.2).abs() < 1e-12);
        let cs = constraint_set(&[0.15], 0.1, 2.0, 0.2, 3).unwrap();
        let (lo, hi) = cs.window(0, 0);
        assert!((lo - 0.1).abs() < 1e-12 && (hi - 0.35).abs() < 1e-12);
        assert!(constraint_set(&[1.0], 2.0, 0.1, 0.2, 3).is_err());
        assert!(constraint_set(&[1.0], 0.1, 2.0, 0.0, 3).is_err());
    }

    #[test]
    fn reachable_sets_match_enumeration() {
        let m = 3;
        let grid: Vec<f64> = (0..=38).map(|k| 0.1 + 0.05 * k as f64).collect();
        for prev in [0.15, 1.0, 1.95] {
            let cs = constraint_set(&[prev], 0.1, 2.0, 0.2, m).unwrap();
            let (g, h) = cs.rows();
            let mut seen = vec![(f64::INFINITY, f64::NEG_INFINITY); m];
            for a in &grid {
                for b in &grid {
                    for c in &grid {
                        let u = DVector::from_vec(vec![*a, *b, *c]);
                        let slack = g.mul_vec(&u) - &h;
                        if slack.max() <= 1e-12 {
                            for (k, v) in [a, b, c].iter().enumerate() {
                                seen[k].0 = seen[k].0.min(**v);
                                seen[k].1 = seen[k].1.max(**v);
                            }
                        }
                    }
                }
            }
            for k in 0..m {
                let (lo, hi) = cs.window(k, 0);
                let outer_lo = (prev - (k + 1) as f64 * 0.2).max(0.1);
                let outer_hi = (prev + (k + 1) as f64 * 0.2).min(2.0);
                assert!(lo >= outer_lo - 1e-12 && hi <= outer_hi + 1e-12);
                // grid points reach the window edges up to grid resolution
                assert!(seen[k].0 - lo < 0.05 + 1e-9 && hi - seen[k].1 < 0.05 + 1e-9);
                assert!(seen[k].0 >= lo - 1e-12 && seen[k].1 <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn shifted_plan_stays_feasible() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let (pred, p_ref, prev, cs) = instance(&mut rng, 3, 5);
            let qp = assemble_qp(&pred, &p_ref, &MpcWeights::default(), &prev, &cs, 1e-12).unwrap();
            let sol = solve(&qp.problem, &QpSettings::default(), None).unwrap();
            assert!(sol.is_solved());
            let next_prev: Vec<f64> = (0..3).map(|i| sol.x[i]).collect();
            let next = constraint_set(&next_prev, 0.1, 2.0, 0.2, 5).unwrap();
            let (g, h) = next.rows();
            let slack = g.mul_vec(&next.shifted(&sol.x)) - h;
            assert!(slack.max() <= 1e-6);
        }
    }

    #[test]
    fn capped_bounds_keep_a_feasible_path() {
        let mut cs = constraint_set(&[1.5, 0.5], 0.1, 2.0, 0.2, 4).unwrap();
        cs.cap_turbine(0, 0.6);
        cs.cap_turbine(1, 0.6);
        assert_eq!(cs.window(0, 0), (1.3, 1.3));
        assert!((cs.window(3, 0).1 - 0.7).abs() < 1e-12);
        assert!((cs.window(0, 1).1 - 0.6).abs() < 1e-12);
        for k in 0..4 {
            for i in 0..2 {
                let (lo, hi) = cs.window(k, i);
                assert!(lo <= hi + 1e-12);
            }
        }
    }
}
