//! Active-learning MPC: condensed prediction over the frozen lifted model and an
//! SQP loop with a trust region on the input sequence.

mod cost;
mod sensitivity;

use std::ops::AddAssign;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use cost::{info_gradient, info_value, predicted_gramian_floor, rollout, task_cost};
pub use sensitivity::{first_order_sensitivity_check, gramian_floor_check, SensitivityReport};

use crate::adaptation::LiftedModelEstimate;
use crate::error::{check_len, CoreError, Result};
use crate::linalg::{dare, symmetrize};
use crate::qp::{qp_solve_with, QpInstance, QpSettings, QpStatus};
use crate::safety::{h_value, pointwise_row, Barrier, CbfParams};

/// Exploration weight as a function of the control step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "schedule", rename_all = "snake_case")]
pub enum BetaSchedule {
    #[default]
    Constant,
    /// `β_k = max(floor, β_0 · exp(−k / tau))`.
    Exponential { tau: f64, floor: f64 },
}

impl BetaSchedule {
    pub fn at(&self, beta0: f64, k: usize) -> f64 {
        match *self {
            BetaSchedule::Constant => beta0,
            BetaSchedule::Exponential { tau, floor } => (beta0 * (-(k as f64) / tau).exp()).max(floor),
        }
    }
}

/// One MPC instance. `reference[i]` is the physical target for predicted step `i + 1`.
#[derive(Debug, Clone)]
pub struct MpcProblem {
    pub horizon: usize,
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub beta: f64,
    pub beta_schedule: BetaSchedule,
    /// Control step used to evaluate the schedule.
    pub step: usize,
    pub eps_reg: f64,
    pub input_lower: DVector<f64>,
    pub input_upper: DVector<f64>,
    /// Physical state bounds before tightening; infinite entries are skipped.
    pub state_lower: DVector<f64>,
    pub state_upper: DVector<f64>,
    pub barriers: Vec<Barrier>,
    pub cbf: CbfParams,
    /// Tightening scalar applied to state bounds, pointwise rows and decay rows.
    pub delta: f64,
    pub reference: Vec<DVector<f64>>,
    /// Lifted terminal weight (p × p). It enters through its physical block `C P Cᵀ`
    /// applied to the terminal tracking error.
    pub terminal_p: Option<DMatrix<f64>>,
    /// Physical state at the time of the solve, used by the first decay row.
    pub x_current: DVector<f64>,
}

impl MpcProblem {
    /// Unconstrained tracking problem with infinite state bounds and no barriers.
    pub fn tracking(
        horizon: usize,
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        input_lower: DVector<f64>,
        input_upper: DVector<f64>,
        reference: Vec<DVector<f64>>,
        x_current: DVector<f64>,
    ) -> Self {
        let n = q.nrows();
        Self {
            horizon,
            q,
            r,
            beta: 0.0,
            beta_schedule: BetaSchedule::Constant,
            step: 0,
            eps_reg: 1e-3,
            input_lower,
            input_upper,
            state_lower: DVector::from_element(n, f64::NEG_INFINITY),
            state_upper: DVector::from_element(n, f64::INFINITY),
            barriers: Vec::new(),
            cbf: CbfParams::default(),
            delta: 0.0,
            reference,
            terminal_p: None,
            x_current,
        }
    }

    pub fn effective_beta(&self) -> f64 {
        self.beta_schedule.at(self.beta, self.step)
    }

    pub fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.horizon == 0 {
            return Err(CoreError::InvalidParameter("horizon must be at least 1".into()));
        }
        check_len("Q rows", n, self.q.nrows())?;
        check_len("Q columns", n, self.q.ncols())?;
        check_len("R rows", m, self.r.nrows())?;
        check_len("R columns", m, self.r.ncols())?;
        check_len("input lower bound", m, self.input_lower.len())?;
        check_len("input upper bound", m, self.input_upper.len())?;
        check_len("state lower bound", n, self.state_lower.len())?;
        check_len("state upper bound", n, self.state_upper.len())?;
        check_len("reference length", self.horizon, self.reference.len())?;
        check_len("current state", n, self.x_current.len())?;
        for r in &self.reference {
            check_len("reference entry", n, r.len())?;
        }
        if self.r.clone().cholesky().is_none() {
            return Err(CoreError::InvalidParameter("R must be positive definite".into()));
        }
        if crate::linalg::lambda_min(&self.q) < -1e-12 {
            return Err(CoreError::InvalidParameter("Q must be positive semidefinite".into()));
        }
        if !(self.eps_reg > 0.0) {
            return Err(CoreError::InvalidParameter("eps_reg must be positive".into()));
        }
        if !(self.beta >= 0.0) {
            return Err(CoreError::InvalidParameter("beta must be nonnegative".into()));
        }
        if self.input_lower.iter().zip(self.input_upper.iter()).any(|(l, u)| !(l <= u))
            || self.state_lower.iter().zip(self.state_upper.iter()).any(|(l, u)| !(l <= u))
        {
            return Err(CoreError::InvalidParameter("box lower bound exceeds upper bound".into()));
        }
        self.cbf.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SqpSettings {
    pub max_iters: usize,
    pub qp_tolerance: f64,
    pub qp_max_iters: usize,
    /// Initial per-component bound on the input step.
    pub trust_region_radius: f64,
    pub trust_region_max: f64,
    pub convergence_tol: f64,
    pub soft_cbf_weight: f64,
    /// Penalty used when hard rows have to be relaxed, and for hard-row violations
    /// in the merit function.
    pub hard_relax_weight: f64,
    pub hessian_damping: f64,
    /// Wall-clock budget per solve in seconds; `None` disables the cutoff.
    pub time_budget_s: Option<f64>,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self {
            max_iters: 30,
            qp_tolerance: 1e-8,
            qp_max_iters: 4000,
            trust_region_radius: 10.0,
            trust_region_max: 1e3,
            convergence_tol: 1e-7,
            soft_cbf_weight: 1e4,
            hard_relax_weight: 1e6,
            hessian_damping: 1e-8,
            time_budget_s: None,
        }
    }
}

impl SqpSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.qp_tolerance,
            self.trust_region_radius,
            self.trust_region_max,
            self.convergence_tol,
            self.soft_cbf_weight,
            self.hard_relax_weight,
        ];
        if self.max_iters == 0 || self.qp_max_iters == 0 || positive.iter().any(|v| !(*v > 0.0)) {
            return Err(CoreError::InvalidParameter("SQP settings must be positive".into()));
        }
        if !(self.hessian_damping >= 0.0) {
            return Err(CoreError::InvalidParameter("Hessian damping must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MpcStatus {
    Converged,
    MaxIters,
    InfeasibleRelaxed,
}

impl MpcStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            MpcStatus::Converged => "converged",
            MpcStatus::MaxIters => "max-iters",
            MpcStatus::InfeasibleRelaxed => "infeasible-relaxed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct MpcSolution {
    /// Input sequence, m × Np.
    pub u: DMatrix<f64>,
    /// Predicted lifted trajectory, p × (Np+1).
    pub z: DMatrix<f64>,
    /// Predicted regressors, (p+m) × Np.
    pub v: DMatrix<f64>,
    pub j_task: f64,
    pub j_info: f64,
    pub beta: f64,
    pub status: MpcStatus,
    pub sqp_iters: usize,
    pub qp_iters: usize,
    /// Largest soft-row violation of the returned sequence on the linearized rows.
    pub max_slack: f64,
    /// `λ_min(V̂V̂ᵀ)` for the returned sequence.
    pub gramian_floor: f64,
    /// Merit value after each accepted step, starting with the initial iterate.
    pub merit_history: Vec<f64>,
    /// Actual over predicted decrease for each accepted step.
    pub step_ratios: Vec<f64>,
    /// Primal and dual residual of the last QP solved.
    pub final_qp_residual: f64,
}

impl MpcSolution {
    pub fn first_input(&self) -> DVector<f64> {
        self.u.column(0).into_owned()
    }
}

/// Step-k solution shifted by one with the last input repeated.
pub fn shift_warm_start(u: &DMatrix<f64>) -> DMatrix<f64> {
    let np = u.ncols();
    let mut out = u.clone();
    for i in 0..np.saturating_sub(1) {
        out.set_column(i, &u.column(i + 1));
    }
    out
}

/// Physical terminal weight from the DARE of `(Â, B̂, CᵀQC, R)`, returned as a lifted p × p matrix.
pub fn terminal_weight(model: &LiftedModelEstimate, q: &DMatrix<f64>, r: &DMatrix<f64>) -> DMatrix<f64> {
    let c = model.c();
    let ql = c.transpose() * q * c;
    let (p, _) = dare(&model.a(), &model.b(), &ql, r, 500, 1e-10);
    p
}

/// Relative Frobenius change between two model snapshots.
pub fn model_change(previous: &DMatrix<f64>, current: &DMatrix<f64>) -> f64 {
    (current - previous).norm() / previous.norm().max(f64::MIN_POSITIVE)
}

/// Condensed prediction: `x_i(U) = x̄_i^free + S_i U` in physical coordinates.
struct Condensed {
    n: usize,
    m: usize,
    np: usize,
    /// Physical free response for i = 0..=Np.
    free: Vec<DVector<f64>>,
    /// Physical sensitivity blocks for i = 0..=Np, each n × (m·Np).
    s: Vec<DMatrix<f64>>,
    h_task: DMatrix<f64>,
    terminal: Option<DMatrix<f64>>,
}

impl Condensed {
    fn build(model: &LiftedModelEstimate, z0: &DVector<f64>, problem: &MpcProblem) -> Self {
        let (p, m, np) = (model.lifted_dim(), model.input_dim(), problem.horizon);
        let n = model.state_dim();
        let a = model.a();
        let b = model.b();
        let c = model.c();
        let mut zfree = z0.clone();
        let mut sz = DMatrix::<f64>::zeros(p, m * np);
        let mut free = vec![c * &zfree];
        let mut s = vec![DMatrix::zeros(n, m * np)];
        for i in 0..np {
            zfree = &a * &zfree;
            sz = &a * &sz;
            sz.view_mut((0, i * m), (p, m)).copy_from(&b);
            free.push(c * &zfree);
            s.push(c * &sz);
        }
        let terminal = problem.terminal_p.as_ref().map(|tp| {
            let mut pt = c * tp * c.transpose();
            symmetrize(&mut pt);
            pt
        });
        let mut h = DMatrix::zeros(m * np, m * np);
        for i in 1..=np {
            h += s[i].transpose() * &problem.q * &s[i];
            h.view_mut(((i - 1) * m, (i - 1) * m), (m, m)).add_assign(&problem.r);
        }
        if let Some(pt) = &terminal {
            h += s[np].transpose() * pt * &s[np];
        }
        h *= 2.0;
        symmetrize(&mut h);
        Self {
            n,
            m,
            np,
            free,
            s,
            h_task: h,
            terminal,
        }
    }

    fn states(&self, u: &DVector<f64>) -> Vec<DVector<f64>> {
        self.free.iter().zip(&self.s).map(|(f, s)| f + s * u).collect()
    }

    fn task(&self, u: &DVector<f64>, x: &[DVector<f64>], problem: &MpcProblem) -> (f64, DVector<f64>) {
        let m = self.m;
        let mut cost = 0.0;
        let mut grad = DVector::zeros(m * self.np);
        for i in 1..=self.np {
            let e = &x[i] - &problem.reference[i - 1];
            let qe = &problem.q * &e;
            cost += e.dot(&qe);
            grad += self.s[i].transpose() * qe * 2.0;
            let ui = u.rows((i - 1) * m, m);
            let ru = &problem.r * ui;
            cost += ui.dot(&ru);
            grad.rows_mut((i - 1) * m, m).add_assign(&(ru * 2.0));
        }
        if let Some(pt) = &self.terminal {
            let e = &x[self.np] - &problem.reference[self.np - 1];
            let pe = pt * &e;
            cost += e.dot(&pe);
            grad += self.s[self.np].transpose() * pe * 2.0;
        }
        (cost, grad)
    }
}

/// Information term and its gradient with respect to the stacked inputs, by the
/// adjoint recursion through the rollout.
fn info_with_gradient(
    model: &LiftedModelEstimate,
    z0: &DVector<f64>,
    u: &DMatrix<f64>,
    eps: f64,
) -> Result<(f64, DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let (z, v) = rollout(model, z0, u)?;
    let value = info_value(&v, eps)?;
    let gv = info_gradient(&v, eps)?;
    let (p, m, np) = (model.lifted_dim(), model.input_dim(), u.ncols());
    let at = model.a().transpose();
    let bt = model.b().transpose();
    let mut grad = DVector::zeros(m * np);
    let mut mu = DVector::<f64>::zeros(p);
    for i in (0..np).rev() {
        // mu holds ∂J/∂z_{i+1}
        let gu = gv.view((p, i), (m, 1)).column(0).into_owned() + &bt * &mu;
        grad.rows_mut(i * m, m).copy_from(&gu);
        mu = gv.view((0, i), (p, 1)).column(0).into_owned() + &at * &mu;
    }
    Ok((value, grad, z, v))
}

/// Linearized constraint rows in the step `Δ`, all in `a·Δ ≤ b` form, together with
/// the nonlinear violation of each row at the current iterate.
#[derive(Default)]
struct RowSet {
    hard_a: Vec<DVector<f64>>,
    hard_b: Vec<f64>,
    soft_a: Vec<DVector<f64>>,
    soft_b: Vec<f64>,
}

impl RowSet {
    fn violation(rows_a: &[DVector<f64>], rows_b: &[f64], d: &DVector<f64>) -> f64 {
        rows_a
            .iter()
            .zip(rows_b)
            .map(|(a, b)| (a.dot(d) - b).max(0.0))
            .sum()
    }

    fn max_violation(rows_a: &[DVector<f64>], rows_b: &[f64], d: &DVector<f64>) -> f64 {
        rows_a
            .iter()
            .zip(rows_b)
            .map(|(a, b)| (a.dot(d) - b).max(0.0))
            .fold(0.0, f64::max)
    }

    fn to_matrix(rows: &[DVector<f64>], dim: usize) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(rows.len(), dim);
        for (i, r) in rows.iter().enumerate() {
            a.row_mut(i).copy_from(&r.transpose());
        }
        a
    }
}

fn build_rows(cond: &Condensed, x: &[DVector<f64>], problem: &MpcProblem) -> RowSet {
    let dim = cond.m * cond.np;
    let mut rows = RowSet::default();
    let delta = problem.delta.max(0.0);
    let alpha = problem.cbf.alpha_cbf;
    for i in 1..=cond.np {
        for j in 0..cond.n {
            let srow = cond.s[i].row(j).transpose();
            if problem.state_upper[j].is_finite() {
                rows.hard_a.push(srow.clone());
                rows.hard_b.push(problem.state_upper[j] - delta - x[i][j]);
            }
            if problem.state_lower[j].is_finite() {
                rows.hard_a.push(-srow);
                rows.hard_b.push(x[i][j] - problem.state_lower[j] - delta);
            }
        }
    }
    for barrier in &problem.barriers {
        // gradients with the degenerate-center fallback handled by the row builder
        let grads: Vec<DVector<f64>> = x.iter().map(|xi| pointwise_row(barrier, xi, 0.0, None).coeffs).collect();
        let hs: Vec<f64> = x.iter().map(|xi| h_value(barrier, xi)).collect();
        for i in 0..cond.np {
            let lh = problem.cbf.lipschitz(barrier, &x[i + 1], delta);
            let next = cond.s[i + 1].transpose() * &grads[i + 1];
            let prev = cond.s[i].transpose() * &grads[i];
            // h(x_{i+1}) ≥ (1−α) h(x_i) + L δ, both sides linearized
            rows.soft_a.push(-(next - prev * (1.0 - alpha)));
            rows.soft_b.push(hs[i + 1] - (1.0 - alpha) * hs[i] - lh * delta);
            if barrier.hard {
                rows.hard_a.push(-(cond.s[i + 1].transpose() * &grads[i + 1]));
                rows.hard_b.push(hs[i + 1] - lh * delta);
            }
        }
    }
    debug_assert!(rows.hard_a.iter().chain(&rows.soft_a).all(|r| r.len() == dim));
    rows
}

struct Evaluation {
    x: Vec<DVector<f64>>,
    j_task: f64,
    j_info: f64,
    grad: DVector<f64>,
    rows: RowSet,
    merit: f64,
}

fn evaluate(
    cond: &Condensed,
    model: &LiftedModelEstimate,
    z0: &DVector<f64>,
    u: &DVector<f64>,
    problem: &MpcProblem,
    beta: f64,
    settings: &SqpSettings,
) -> Result<Evaluation> {
    let x = cond.states(u);
    if x.iter().any(|xi| !xi.iter().all(|v| v.is_finite())) {
        let step = x.iter().position(|xi| !xi.iter().all(|v| v.is_finite())).unwrap_or(0);
        return Err(CoreError::RolloutDiverged { step });
    }
    let (j_task, mut grad) = cond.task(u, &x, problem);
    let mut j_info = 0.0;
    if beta > 0.0 {
        let um = DMatrix::from_column_slice(cond.m, cond.np, u.as_slice());
        let (val, g, _, _) = info_with_gradient(model, z0, &um, problem.eps_reg)?;
        j_info = val;
        grad -= g * beta;
    }
    let rows = build_rows(cond, &x, problem);
    let zero = DVector::zeros(u.len());
    let merit = j_task - beta * j_info
        + settings.soft_cbf_weight * RowSet::violation(&rows.soft_a, &rows.soft_b, &zero)
        + settings.hard_relax_weight * RowSet::violation(&rows.hard_a, &rows.hard_b, &zero);
    Ok(Evaluation {
        x,
        j_task,
        j_info,
        grad,
        rows,
        merit,
    })
}

/// Solves one MPC instance from `z0` over the frozen `model`.
pub fn solve(
    problem: &MpcProblem,
    model: &LiftedModelEstimate,
    z0: &DVector<f64>,
    settings: &SqpSettings,
    warm_start: Option<&DMatrix<f64>>,
) -> Result<MpcSolution> {
    let (n, m, np) = (model.state_dim(), model.input_dim(), problem.horizon);
    problem.validate(n, m)?;
    settings.validate()?;
    check_len("initial lifted state", model.lifted_dim(), z0.len())?;
    let started = Instant::now();
    let beta = problem.effective_beta();
    let dim = m * np;
    let lower = DVector::from_fn(dim, |i, _| problem.input_lower[i % m]);
    let upper = DVector::from_fn(dim, |i, _| problem.input_upper[i % m]);

    let mut u = match warm_start {
        Some(w) => {
            check_len("warm start rows", m, w.nrows())?;
            check_len("warm start columns", np, w.ncols())?;
            DVector::from_column_slice(w.as_slice())
        }
        None => DVector::zeros(dim),
    };
    for i in 0..dim {
        u[i] = u[i].clamp(lower[i], upper[i]);
    }

    let cond = Condensed::build(model, z0, problem);
    let mut h = cond.h_task.clone();
    for i in 0..dim {
        h[(i, i)] += settings.hessian_damping;
    }
    let qp_settings = QpSettings {
        eps_abs: settings.qp_tolerance,
        eps_rel: settings.qp_tolerance,
        max_iters: settings.qp_max_iters,
        ..Default::default()
    };

    let mut eval = evaluate(&cond, model, z0, &u, problem, beta, settings)?;
    let mut radius = settings.trust_region_radius;
    let mut status = MpcStatus::MaxIters;
    let mut relaxed = false;
    let mut sqp_iters = 0;
    let mut qp_iters = 0;
    let mut final_residual = f64::INFINITY;
    let mut merit_history = vec![eval.merit];
    let mut step_ratios = Vec::new();

    for _ in 0..settings.max_iters {
        if let Some(budget) = settings.time_budget_s {
            if started.elapsed().as_secs_f64() > budget {
                break;
            }
        }
        sqp_iters += 1;
        let lb = DVector::from_fn(dim, |i, _| (lower[i] - u[i]).max(-radius));
        let ub = DVector::from_fn(dim, |i, _| (upper[i] - u[i]).min(radius));
        let soft_w = DVector::from_element(eval.rows.soft_a.len(), settings.soft_cbf_weight);
        let base = QpInstance::new(h.clone(), eval.grad.clone())
            .with_box(lb, ub)
            .with_soft(
                RowSet::to_matrix(&eval.rows.soft_a, dim),
                DVector::from_vec(eval.rows.soft_b.clone()),
                soft_w.clone(),
            );
        let hard_a = RowSet::to_matrix(&eval.rows.hard_a, dim);
        let hard_b = DVector::from_vec(eval.rows.hard_b.clone());
        let mut res = qp_solve_with(&base.clone().with_hard(hard_a.clone(), hard_b.clone()), &qp_settings)?;
        qp_iters += res.iterations;
        let mut this_relaxed = false;
        if res.status == QpStatus::PrimalInfeasible {
            let hard_w = DVector::from_element(hard_b.len(), settings.hard_relax_weight);
            let soft_a = RowSet::to_matrix(&[eval.rows.soft_a.clone(), eval.rows.hard_a.clone()].concat(), dim);
            let soft_b = DVector::from_vec([eval.rows.soft_b.clone(), eval.rows.hard_b.clone()].concat());
            let soft_w = DVector::from_iterator(
                soft_w.len() + hard_w.len(),
                soft_w.iter().chain(hard_w.iter()).copied(),
            );
            let relaxed_qp = QpInstance::new(h.clone(), eval.grad.clone())
                .with_box(base.lb.clone(), base.ub.clone())
                .with_soft(soft_a, soft_b, soft_w);
            res = qp_solve_with(&relaxed_qp, &qp_settings)?;
            qp_iters += res.iterations;
            this_relaxed = true;
        }
        final_residual = res.primal_residual.max(res.dual_residual);
        let d = res.x.clone();
        let step = d.amax();

        let model_merit = |d: &DVector<f64>| {
            eval.grad.dot(d)
                + 0.5 * d.dot(&(&h * d))
                + settings.soft_cbf_weight * RowSet::violation(&eval.rows.soft_a, &eval.rows.soft_b, d)
                + settings.hard_relax_weight * RowSet::violation(&eval.rows.hard_a, &eval.rows.hard_b, d)
        };
        let zero = DVector::zeros(dim);
        let predicted = model_merit(&zero) - model_merit(&d);

        if step <= settings.convergence_tol * (1.0 + u.amax()) || predicted <= 1e-14 * (1.0 + eval.merit.abs()) {
            relaxed |= this_relaxed;
            if res.status != QpStatus::MaxIterations {
                status = MpcStatus::Converged;
            }
            break;
        }

        let mut candidate = &u + &d;
        for i in 0..dim {
            candidate[i] = candidate[i].clamp(lower[i], upper[i]);
        }
        let trial = evaluate(&cond, model, z0, &candidate, problem, beta, settings)?;
        let actual = eval.merit - trial.merit;
        let ratio = actual / predicted;
        if actual >= 0.0 && ratio >= 0.1 {
            relaxed |= this_relaxed;
            if (0.75..=10.0).contains(&ratio) && step >= 0.9 * radius {
                radius = (2.0 * radius).min(settings.trust_region_max);
            }
            u = candidate;
            eval = trial;
            merit_history.push(eval.merit);
            step_ratios.push(ratio);
        } else {
            radius *= 0.5;
            if radius < 1e-12 {
                break;
            }
        }
    }

    if relaxed {
        status = MpcStatus::InfeasibleRelaxed;
    }

    let um = DMatrix::from_column_slice(m, np, u.as_slice());
    let (z, v) = rollout(model, z0, &um)?;
    let j_info = if beta > 0.0 { eval.j_info } else { info_value(&v, problem.eps_reg)? };
    let zero = DVector::zeros(dim);
    let max_slack = RowSet::max_violation(&eval.rows.soft_a, &eval.rows.soft_b, &zero);
    debug_assert_eq!(eval.x.len(), np + 1);
    Ok(MpcSolution {
        gramian_floor: predicted_gramian_floor(&v),
        u: um,
        z,
        v,
        j_task: eval.j_task,
        j_info,
        beta,
        status,
        sqp_iters,
        qp_iters,
        max_slack,
        merit_history,
        step_ratios,
        final_qp_residual: final_residual,
    })
}

/// Task objective and gradient at an arbitrary input sequence; used by the
/// sensitivity check and by tests.
pub fn task_objective(
    problem: &MpcProblem,
    model: &LiftedModelEstimate,
    z0: &DVector<f64>,
    u: &DMatrix<f64>,
) -> Result<f64> {
    let (z, _) = rollout(model, z0, u)?;
    let terminal = problem.terminal_p.as_ref().map(|tp| model.c() * tp * model.c().transpose());
    task_cost(&z, u, model.c(), &problem.reference, &problem.q, &problem.r, terminal.as_ref())
}
