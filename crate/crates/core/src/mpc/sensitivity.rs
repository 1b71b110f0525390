//! Small-β checks: first-order sensitivity of the optimizer and the Gramian floor.

use nalgebra::{DMatrix, DVector};

use super::{rollout, solve, task_objective, BetaSchedule, MpcProblem, MpcSolution, MpcStatus, SqpSettings};
use crate::adaptation::LiftedModelEstimate;
use crate::error::{CoreError, Result};
use crate::mpc::info_value;
use crate::safety::h_value;

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub betas: Vec<f64>,
    /// `‖U_AL(β) − U_nom − β H⁻¹ g‖` for each β.
    pub residuals: Vec<f64>,
    /// `J_info(U_AL(β)) − J_info(U_nom)` for each β.
    pub info_gains: Vec<f64>,
    /// Least-squares `c` in `residual ≈ c β²`.
    pub coefficient: f64,
    pub r_squared: f64,
    /// Set when the nominal optimum touches a constraint and the check does not apply.
    pub skipped: Option<String>,
}

fn stacked(u: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(u.as_slice())
}

fn unstacked(u: &DVector<f64>, m: usize) -> DMatrix<f64> {
    DMatrix::from_column_slice(m, u.len() / m, u.as_slice())
}

fn active_constraint(problem: &MpcProblem, sol: &MpcSolution, model: &LiftedModelEstimate) -> Option<String> {
    let tol = 1e-7;
    for (i, col) in sol.u.column_iter().enumerate() {
        for j in 0..col.len() {
            if col[j] <= problem.input_lower[j] + tol || col[j] >= problem.input_upper[j] - tol {
                return Some(format!("input {j} at step {i} is on its bound"));
            }
        }
    }
    for i in 1..sol.z.ncols() {
        let x = model.c() * sol.z.column(i);
        for j in 0..x.len() {
            if x[j] <= problem.state_lower[j] + problem.delta + tol || x[j] >= problem.state_upper[j] - problem.delta - tol {
                return Some(format!("state {j} at step {i} is on its bound"));
            }
        }
        for (b, barrier) in problem.barriers.iter().enumerate() {
            let prev = model.c() * sol.z.column(i - 1);
            let lh = problem.cbf.lipschitz(barrier, &x, problem.delta);
            let slack = h_value(barrier, &x) - (1.0 - problem.cbf.alpha_cbf) * h_value(barrier, &prev) - lh * problem.delta;
            if slack <= tol {
                return Some(format!("barrier {b} decay row is active at step {i}"));
            }
        }
    }
    None
}

fn info_at(problem: &MpcProblem, model: &LiftedModelEstimate, z0: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    let (_, v) = rollout(model, z0, &unstacked(u, model.input_dim()))?;
    info_value(&v, problem.eps_reg)
}

fn task_at(problem: &MpcProblem, model: &LiftedModelEstimate, z0: &DVector<f64>, u: &DVector<f64>) -> Result<f64> {
    task_objective(problem, model, z0, &unstacked(u, model.input_dim()))
}

/// Compares `U_AL(β)` with its first-order prediction `U_nom + β H⁻¹ g` where `g`
/// is the information gradient and `H` the task Hessian, both by finite differences.
pub fn first_order_sensitivity_check(
    problem: &MpcProblem,
    model: &LiftedModelEstimate,
    z0: &DVector<f64>,
    settings: &SqpSettings,
    betas: &[f64],
) -> Result<SensitivityReport> {
    let mut nominal_problem = problem.clone();
    nominal_problem.beta = 0.0;
    nominal_problem.beta_schedule = BetaSchedule::Constant;
    let nominal = solve(&nominal_problem, model, z0, settings, None)?;
    let mut report = SensitivityReport {
        betas: betas.to_vec(),
        residuals: Vec::new(),
        info_gains: Vec::new(),
        coefficient: 0.0,
        r_squared: 1.0,
        skipped: None,
    };
    if nominal.status != MpcStatus::Converged {
        report.skipped = Some(format!("nominal solve ended with status {}", nominal.status.as_str()));
        return Ok(report);
    }
    if let Some(reason) = active_constraint(problem, &nominal, model) {
        report.skipped = Some(reason);
        return Ok(report);
    }

    let u_nom = stacked(&nominal.u);
    let dim = u_nom.len();
    let hg = 1e-5;
    let mut g = DVector::zeros(dim);
    for i in 0..dim {
        let mut up = u_nom.clone();
        let mut um = u_nom.clone();
        up[i] += hg;
        um[i] -= hg;
        g[i] = (info_at(problem, model, z0, &up)? - info_at(problem, model, z0, &um)?) / (2.0 * hg);
    }
    // the task cost is quadratic in U, so a wide stencil is exact up to rounding
    let hh = 1e-2;
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in i..dim {
            let mut acc = 0.0;
            for (si, sj, sign) in [(1.0, 1.0, 1.0), (1.0, -1.0, -1.0), (-1.0, 1.0, -1.0), (-1.0, -1.0, 1.0)] {
                let mut u = u_nom.clone();
                u[i] += si * hh;
                u[j] += sj * hh;
                acc += sign * task_at(problem, model, z0, &u)?;
            }
            h[(i, j)] = acc / (4.0 * hh * hh);
            h[(j, i)] = h[(i, j)];
        }
    }
    let direction = h
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&g))
        .or_else(|| h.clone().lu().solve(&g))
        .ok_or(CoreError::NonFinite("task Hessian is singular"))?;
    let info_nom = info_at(problem, model, z0, &u_nom)?;

    for &beta in betas {
        let mut p = problem.clone();
        p.beta = beta;
        p.beta_schedule = BetaSchedule::Constant;
        let sol = solve(&p, model, z0, settings, Some(&nominal.u))?;
        let u_al = stacked(&sol.u);
        report.residuals.push((&u_al - &u_nom - &direction * beta).norm());
        report.info_gains.push(info_at(problem, model, z0, &u_al)? - info_nom);
    }

    let b4: f64 = betas.iter().map(|b| b.powi(4)).sum();
    if b4 > 0.0 {
        let c = betas.iter().zip(&report.residuals).map(|(b, r)| r * b * b).sum::<f64>() / b4;
        let mean = report.residuals.iter().sum::<f64>() / report.residuals.len() as f64;
        let ss_res: f64 = betas.iter().zip(&report.residuals).map(|(b, r)| (r - c * b * b).powi(2)).sum();
        let ss_tot: f64 = report.residuals.iter().map(|r| (r - mean).powi(2)).sum();
        report.coefficient = c;
        report.r_squared = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    Ok(report)
}

/// Smallest `λ_min(V̂V̂ᵀ)` over a scenario's solutions, `None` for an empty run.
pub fn gramian_floor_check(solutions: &[MpcSolution]) -> Option<f64> {
    solutions.iter().map(|s| s.gramian_floor).reduce(f64::min)
}
