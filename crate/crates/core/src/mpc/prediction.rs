use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::error::{Error, Result};

/// Exact zero-order-hold discretization of `τ·dĈ/dt + Ĉ = C`.
pub fn discretize_filter(tau: f64, dt: f64) -> Result<(f64, f64)> {
    if !(tau >= 0.0) || !(dt > 0.0) {
        return Err(Error::invalid(format!("filter needs tau >= 0 and dt > 0, got {tau}, {dt}")));
    }
    if tau == 0.0 {
        return Ok((0.0, 1.0));
    }
    let a = (-dt / tau).exp();
    Ok((a, 1.0 - a))
}

/// Linear prediction over the horizon with the wind frozen at its current
/// value.
///
/// Per turbine the state is `X_i = [F_i, P_i, Ĉ_i]` and the decision is the
/// commanded `C_T'`. With `K = ½ρA`:
///
/// ```text
/// Ĉ(k+1) = a·Ĉ(k) + b·u(k)
/// F(k+1) = K·U²·Ĉ(k+1),   P(k+1) = K·U³·Ĉ(k+1)
/// ```
///
/// The correction `μ ⊙ (X(t₀) − X(t₀|t₀−1))` is added to the first
/// predicted block only.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionModel {
    pub a: f64,
    pub b: f64,
    pub half_rho_a: f64,
    pub horizon: usize,
    pub winds: Vec<f64>,
    /// Measured state, `3N`.
    pub x0: DVector<f64>,
    /// Correction applied to `X(t₀+1)`, `3N`.
    pub correction: DVector<f64>,
}

/// Builds the prediction for one control step.
#[allow(clippy::too_many_arguments)]
pub fn build_prediction(
    x0: &[f64],
    winds: &[f64],
    half_rho_a: f64,
    filter: (f64, f64),
    horizon: usize,
    mu: [f64; 3],
    prev_prediction: Option<&[f64]>,
) -> Result<PredictionModel> {
    let n = winds.len();
    if n == 0 || horizon == 0 {
        return Err(Error::invalid("prediction needs at least one turbine and one step"));
    }
    if x0.len() != 3 * n {
        return Err(Error::invalid(format!(
            "state has {} entries, expected 3 x {n} turbines",
            x0.len()
        )));
    }
    if winds.iter().any(|u| !(*u > 0.0) || !u.is_finite()) {
        return Err(Error::invalid("frozen wind speeds must be positive"));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("measured state is not finite"));
    }
    if mu.iter().any(|m| !(0.0..=1.0).contains(m)) {
        return Err(Error::invalid("correction gains must lie in [0, 1]"));
    }
    let (a, b) = filter;
    if !(0.0..1.0).contains(&a) || (a + b - 1.0).abs() > 1e-12 {
        return Err(Error::invalid("filter pair must satisfy a in [0, 1) and b = 1 - a"));
    }
    let x0 = DVector::from_column_slice(x0);
    let correction = match prev_prediction {
        Some(prev) => {
            if prev.len() != 3 * n {
                return Err(Error::invalid("previous prediction has the wrong dimension"));
            }
            DVector::from_fn(3 * n, |r, _| mu[r % 3] * (x0[r] - prev[r]))
        }
        None => DVector::zeros(3 * n),
    };
    Ok(PredictionModel {
        a,
        b,
        half_rho_a,
        horizon,
        winds: winds.to_vec(),
        x0,
        correction,
    })
}

impl PredictionModel {
    pub fn turbines(&self) -> usize {
        self.winds.len()
    }

    pub fn force_gain(&self, i: usize) -> f64 {
        self.half_rho_a * self.winds[i].powi(2)
    }

    pub fn power_gain(&self, i: usize) -> f64 {
        self.half_rho_a * self.winds[i].powi(3)
    }

    pub fn block_a(&self, i: usize) -> Matrix3<f64> {
        let (kf, kp) = (self.force_gain(i), self.power_gain(i));
        Matrix3::new(0.0, 0.0, kf * self.a, 0.0, 0.0, kp * self.a, 0.0, 0.0, self.a)
    }

    pub fn block_b(&self, i: usize) -> Vector3<f64> {
        Vector3::new(self.force_gain(i) * self.b, self.power_gain(i) * self.b, self.b)
    }

    /// `L[k][j] = a^(k−j)·b` for `j ≤ k`: response of `Ĉ(k+1)` to `u(j)`.
    pub fn response_matrix(&self) -> DMatrix<f64> {
        let m = self.horizon;
        DMatrix::from_fn(m, m, |k, j| {
            if j <= k {
                self.a.powi((k - j) as i32) * self.b
            } else {
                0.0
            }
        })
    }

    /// Free response `a^(k+1)·Ĉ_i(t₀)` for `k = 0..M`.
    pub fn free_ct(&self, i: usize) -> DVector<f64> {
        let c0 = self.x0[3 * i + 2];
        DVector::from_fn(self.horizon, |k, _| self.a.powi(k as i32 + 1) * c0)
    }

    /// Block-diagonal `A` and `B` of the full farm, `3N × 3N` and `3N × N`.
    pub fn farm_matrices(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        let n = self.turbines();
        let mut a = DMatrix::zeros(3 * n, 3 * n);
        let mut b = DMatrix::zeros(3 * n, n);
        for i in 0..n {
            a.fixed_view_mut::<3, 3>(3 * i, 3 * i).copy_from(&self.block_a(i));
            b.fixed_view_mut::<3, 1>(3 * i, i).copy_from(&self.block_b(i));
        }
        (a, b)
    }

    /// Stacked `(Φ, Γ, c)` with `X(1..M) = Φ·X(t₀) + Γ·u + c`. Decisions are
    /// time-major (`u[k·N + i]`). Dense; intended for small instances.
    pub fn stacked(&self) -> (DMatrix<f64>, DMatrix<f64>, DVector<f64>) {
        let n = self.turbines();
        let m = self.horizon;
        let (a, b) = self.farm_matrices();
        let mut powers = vec![DMatrix::identity(3 * n, 3 * n)];
        for k in 1..=m {
            powers.push(&a * &powers[k - 1]);
        }
        let mut phi = DMatrix::zeros(3 * n * m, 3 * n);
        let mut gamma = DMatrix::zeros(3 * n * m, n * m);
        for k in 0..m {
            phi.view_mut((3 * n * k, 0), (3 * n, 3 * n)).copy_from(&powers[k + 1]);
            for j in 0..=k {
                gamma
                    .view_mut((3 * n * k, n * j), (3 * n, n))
                    .copy_from(&(&powers[k - j] * &b));
            }
        }
        let mut c = DVector::zeros(3 * n * m);
        c.rows_mut(0, 3 * n).copy_from(&self.correction);
        (phi, gamma, c)
    }

    /// Predicted `X(t₀+1..t₀+M)` by direct recursion.
    pub fn predict(&self, u: &DVector<f64>) -> Result<Vec<DVector<f64>>> {
        let n = self.turbines();
        if u.len() != n * self.horizon {
            return Err(Error::invalid("decision vector has the wrong length"));
        }
        let (a, b) = self.farm_matrices();
        let mut x = self.x0.clone();
        let mut out = Vec::with_capacity(self.horizon);
        for k in 0..self.horizon {
            x = &a * &x + &b * u.rows(k * n, n);
            out.push(x.clone());
        }
        out[0] += &self.correction;
        Ok(out)
    }
}
