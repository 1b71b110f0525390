//! Prediction, task cost and the log-determinant information term.

use nalgebra::{DMatrix, DVector};

use crate::adaptation::LiftedModelEstimate;
use crate::error::{check_len, CoreError, Result};
use crate::linalg::{spd_solve, sym_eigenvalues};

/// Rolls the lifted model forward from `z0` under the columns of `u` (m × Np).
/// Returns the lifted trajectory `Z` (p × (Np+1)) and the regressor matrix
/// `V̂ = [[ẑ_0; û_0] … [ẑ_{Np−1}; û_{Np−1}]]`.
pub fn rollout(
    model: &LiftedModelEstimate,
    z0: &DVector<f64>,
    u: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = model.lifted_dim();
    let m = model.input_dim();
    check_len("rollout initial state", p, z0.len())?;
    check_len("rollout input rows", m, u.nrows())?;
    let np = u.ncols();
    let a = model.a();
    let b = model.b();
    let mut z = DMatrix::zeros(p, np + 1);
    let mut v = DMatrix::zeros(p + m, np);
    z.set_column(0, z0);
    for i in 0..np {
        let zi = z.column(i).into_owned();
        let ui = u.column(i).into_owned();
        let next = &a * &zi + &b * &ui;
        if !next.iter().all(|x| x.is_finite()) {
            return Err(CoreError::RolloutDiverged { step: i + 1 });
        }
        v.view_mut((0, i), (p, 1)).copy_from(&zi);
        v.view_mut((p, i), (m, 1)).copy_from(&ui);
        z.set_column(i + 1, &next);
    }
    Ok((z, v))
}

/// `Σ_{i=1}^{Np} ‖C ẑ_i − r_i‖²_Q + Σ_{i=0}^{Np−1} ‖û_i‖²_R`, plus
/// `‖C ẑ_Np − r_Np‖²_P` when a terminal weight is given.
pub fn task_cost(
    z: &DMatrix<f64>,
    u: &DMatrix<f64>,
    c: &DMatrix<f64>,
    reference: &[DVector<f64>],
    q: &DMatrix<f64>,
    r: &DMatrix<f64>,
    terminal: Option<&DMatrix<f64>>,
) -> Result<f64> {
    let np = u.ncols();
    check_len("task cost trajectory length", np + 1, z.ncols())?;
    check_len("task cost reference length", np, reference.len())?;
    let mut cost = 0.0;
    for i in 0..np {
        let e = c * z.column(i + 1) - &reference[i];
        cost += e.dot(&(q * &e));
        let ui = u.column(i);
        cost += ui.dot(&(r * ui));
    }
    if let (Some(p), true) = (terminal, np > 0) {
        let e = c * z.column(np) - &reference[np - 1];
        cost += e.dot(&(p * &e));
    }
    Ok(cost)
}

fn regularized_gramian(v: &DMatrix<f64>, eps: f64) -> DMatrix<f64> {
    let d = v.nrows();
    v * v.transpose() + DMatrix::identity(d, d) * eps
}

/// `log det(V̂V̂ᵀ + εI)`.
pub fn info_value(v: &DMatrix<f64>, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidParameter("log-det regularizer must be positive".into()));
    }
    let g = regularized_gramian(v, eps);
    match g.clone().cholesky() {
        Some(ch) => Ok(2.0 * ch.l().diagonal().iter().map(|d| d.ln()).sum::<f64>()),
        None => Ok(sym_eigenvalues(&g).iter().map(|l| l.max(f64::MIN_POSITIVE).ln()).sum()),
    }
}

/// `∂/∂V̂ log det(V̂V̂ᵀ + εI) = 2 (V̂V̂ᵀ + εI)⁻¹ V̂`.
pub fn info_gradient(v: &DMatrix<f64>, eps: f64) -> Result<DMatrix<f64>> {
    if !(eps > 0.0) {
        return Err(CoreError::InvalidParameter("log-det regularizer must be positive".into()));
    }
    let g = regularized_gramian(v, eps);
    let sol = spd_solve(&g, v).ok_or(CoreError::NonFinite("information gradient"))?;
    Ok(sol * 2.0)
}

/// Smallest eigenvalue of the unregularized predicted Gramian `V̂V̂ᵀ`.
pub fn predicted_gramian_floor(v: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(&(v * v.transpose())).first().copied().unwrap_or(0.0)
}
