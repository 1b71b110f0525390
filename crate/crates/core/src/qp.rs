//! Dense convex QP solver for the SQP subproblems.
//!
//! Solves `min ½xᵀHx + gᵀx` subject to `lb ≤ x ≤ ub`, hard rows `a_i·x ≤ b_i`, and soft
//! rows `a_j·x ≤ b_j + s_j` with `s_j ≥ 0` charged at `w_j s_j`. The iteration is
//! operator splitting (ADMM) with over-relaxation and adaptive penalty, followed by an
//! active-set polish on the reduced KKT system.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_len, CoreError, Result};
use crate::linalg::symmetrize;

#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub h: DMatrix<f64>,
    pub g: DVector<f64>,
    pub hard_a: DMatrix<f64>,
    pub hard_b: DVector<f64>,
    pub soft_a: DMatrix<f64>,
    pub soft_b: DVector<f64>,
    pub soft_w: DVector<f64>,
    pub lb: DVector<f64>,
    pub ub: DVector<f64>,
}

impl QpInstance {
    /// Unconstrained instance of dimension `d` (infinite box, no rows).
    pub fn new(h: DMatrix<f64>, g: DVector<f64>) -> Self {
        let d = g.len();
        Self {
            h,
            g,
            hard_a: DMatrix::zeros(0, d),
            hard_b: DVector::zeros(0),
            soft_a: DMatrix::zeros(0, d),
            soft_b: DVector::zeros(0),
            soft_w: DVector::zeros(0),
            lb: DVector::from_element(d, f64::NEG_INFINITY),
            ub: DVector::from_element(d, f64::INFINITY),
        }
    }

    pub fn with_box(mut self, lb: DVector<f64>, ub: DVector<f64>) -> Self {
        self.lb = lb;
        self.ub = ub;
        self
    }

    pub fn with_hard(mut self, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        self.hard_a = a;
        self.hard_b = b;
        self
    }

    pub fn with_soft(mut self, a: DMatrix<f64>, b: DVector<f64>, w: DVector<f64>) -> Self {
        self.soft_a = a;
        self.soft_b = b;
        self.soft_w = w;
        self
    }

    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        check_len("qp hessian rows", d, self.h.nrows())?;
        check_len("qp hessian cols", d, self.h.ncols())?;
        check_len("qp hard row width", d, self.hard_a.ncols())?;
        check_len("qp hard rhs", self.hard_a.nrows(), self.hard_b.len())?;
        check_len("qp soft row width", d, self.soft_a.ncols())?;
        check_len("qp soft rhs", self.soft_a.nrows(), self.soft_b.len())?;
        check_len("qp soft weights", self.soft_a.nrows(), self.soft_w.len())?;
        check_len("qp lower bound", d, self.lb.len())?;
        check_len("qp upper bound", d, self.ub.len())?;
        if (&self.h - self.h.transpose()).amax() > 1e-10 * self.h.amax().max(1.0) {
            return Err(CoreError::InvalidParameter("qp hessian is not symmetric".into()));
        }
        if self.soft_w.iter().any(|w| !(*w > 0.0)) {
            return Err(CoreError::InvalidParameter("soft row weights must be positive".into()));
        }
        if self.lb.iter().zip(self.ub.iter()).any(|(l, u)| l > u) {
            return Err(CoreError::InvalidParameter("qp box has lower > upper".into()));
        }
        let finite = self.h.iter().chain(self.g.iter()).chain(self.hard_a.iter()).chain(self.soft_a.iter()).all(|v| v.is_finite());
        if !finite {
            return Err(CoreError::NonFinite("qp data"));
        }
        Ok(())
    }

    /// `½xᵀHx + gᵀx`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    /// Objective including the linear penalty on soft-row violations.
    pub fn penalized_objective(&self, x: &DVector<f64>) -> f64 {
        let viol = &self.soft_a * x - &self.soft_b;
        self.objective(x) + viol.iter().zip(self.soft_w.iter()).map(|(v, w)| w * v.max(0.0)).sum::<f64>()
    }

    /// Plain-text dump for offline reproduction.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut block = |name: &str, m: &DMatrix<f64>| {
            let _ = writeln!(out, "{name} {} {}", m.nrows(), m.ncols());
            for r in 0..m.nrows() {
                let row: Vec<String> = (0..m.ncols()).map(|c| format!("{:e}", m[(r, c)])).collect();
                let _ = writeln!(out, "{}", row.join(" "));
            }
        };
        let col = |v: &DVector<f64>| DMatrix::from_column_slice(v.len(), 1, v.as_slice());
        block("H", &self.h);
        block("g", &col(&self.g));
        block("hard_a", &self.hard_a);
        block("hard_b", &col(&self.hard_b));
        block("soft_a", &self.soft_a);
        block("soft_b", &col(&self.soft_b));
        block("soft_w", &col(&self.soft_w));
        block("lb", &col(&self.lb));
        block("ub", &col(&self.ub));
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    MaxIterations,
    PrimalInfeasible,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub x: DVector<f64>,
    /// Multipliers of the hard rows (nonnegative).
    pub hard_duals: DVector<f64>,
    pub soft_slacks: DVector<f64>,
    /// Signed box multipliers: positive at the upper bound, negative at the lower.
    pub box_duals: DVector<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    pub polished: bool,
    pub status: QpStatus,
    pub objective: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QpSettings {
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub max_iters: usize,
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub adaptive_rho_interval: usize,
    pub polish: bool,
    /// Dual-norm threshold and persistence for the divergence-based infeasibility flag.
    pub dual_divergence: f64,
    pub dual_divergence_iters: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self {
            eps_abs: 1e-9,
            eps_rel: 1e-9,
            max_iters: 4000,
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            adaptive_rho_interval: 25,
            polish: true,
            dual_divergence: 1e8,
            dual_divergence_iters: 100,
        }
    }
}

/// Solves with default settings at the given tolerance and iteration cap.
pub fn qp_solve(instance: &QpInstance, tol: f64, max_iters: usize) -> Result<QpResult> {
    qp_solve_with(
        instance,
        &QpSettings {
            eps_abs: tol,
            eps_rel: tol,
            max_iters,
            ..Default::default()
        },
    )
}

/// Internal `l ≤ A y ≤ u` form over `y = [x; s]`.
struct Stacked {
    p: DMatrix<f64>,
    q: DVector<f64>,
    a: DMatrix<f64>,
    l: DVector<f64>,
    u: DVector<f64>,
    d: usize,
    nh: usize,
    ns: usize,
}

impl Stacked {
    fn build(inst: &QpInstance) -> Self {
        let d = inst.dim();
        let nh = inst.hard_a.nrows();
        let ns = inst.soft_a.nrows();
        let nv = d + ns;
        let rows = d + nh + ns + ns;
        let mut p = DMatrix::zeros(nv, nv);
        p.view_mut((0, 0), (d, d)).copy_from(&inst.h);
        symmetrize(&mut p);
        let mut q = DVector::zeros(nv);
        q.rows_mut(0, d).copy_from(&inst.g);
        q.rows_mut(d, ns).copy_from(&inst.soft_w);
        let mut a = DMatrix::zeros(rows, nv);
        let mut l = DVector::from_element(rows, f64::NEG_INFINITY);
        let mut u = DVector::from_element(rows, f64::INFINITY);
        for i in 0..d {
            a[(i, i)] = 1.0;
            l[i] = inst.lb[i];
            u[i] = inst.ub[i];
        }
        a.view_mut((d, 0), (nh, d)).copy_from(&inst.hard_a);
        u.rows_mut(d, nh).copy_from(&inst.hard_b);
        let r0 = d + nh;
        a.view_mut((r0, 0), (ns, d)).copy_from(&inst.soft_a);
        for j in 0..ns {
            a[(r0 + j, d + j)] = -1.0;
            u[r0 + j] = inst.soft_b[j];
            a[(r0 + ns + j, d + j)] = 1.0;
            l[r0 + ns + j] = 0.0;
        }
        Self { p, q, a, l, u, d, nh, ns }
    }

    fn rows(&self) -> usize {
        self.a.nrows()
    }

    /// Which bound each row is guessed to be active at: -1 lower, 1 upper, 0 neither.
    fn active_signature(&self, z: &DVector<f64>, lam: &DVector<f64>) -> Vec<i8> {
        (0..self.rows())
            .map(|i| {
                if self.l[i].is_finite() && z[i] - self.l[i] < -lam[i] {
                    -1
                } else if self.u[i].is_finite() && self.u[i] - z[i] < lam[i] {
                    1
                } else {
                    0
                }
            })
            .collect()
    }

    /// Polishes and keeps the result only if it meets the requested tolerances with
    /// correctly signed multipliers.
    fn accept_polish(
        &self,
        z: &DVector<f64>,
        lam: &DVector<f64>,
        settings: &QpSettings,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let (yp, lp) = polish(self, z, lam)?;
        let (p, d, ps, ds) = self.residuals(&yp, &lp);
        let sign_ok = self.dual_sign_error(&yp, &lp) <= 1e-9 * (1.0 + lp.amax());
        let ok = p <= settings.eps_abs + settings.eps_rel * ps && d <= settings.eps_abs + settings.eps_rel * ds;
        (sign_ok && ok).then_some((yp, lp))
    }

    fn project(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(v.len(), |i, _| v[i].clamp(self.l[i], self.u[i]))
    }

    /// Residuals of a primal/dual pair: constraint violation, stationarity, and the
    /// scaling terms used by the relative tolerances.
    fn residuals(&self, y: &DVector<f64>, lam: &DVector<f64>) -> (f64, f64, f64, f64) {
        let ay = &self.a * y;
        let prim = (0..self.rows())
            .map(|i| (self.l[i] - ay[i]).max(ay[i] - self.u[i]).max(0.0))
            .fold(0.0, f64::max);
        let py = &self.p * y;
        let atl = self.a.transpose() * lam;
        let dual = (&py + &self.q + &atl).amax();
        let prim_scale = ay.amax();
        let dual_scale = py.amax().max(atl.amax()).max(self.q.amax());
        (prim, dual, prim_scale, dual_scale)
    }

    /// Multipliers must lie in the normal cone of the bound set at `A y`.
    fn dual_sign_error(&self, y: &DVector<f64>, lam: &DVector<f64>) -> f64 {
        let ay = &self.a * y;
        let mut err: f64 = 0.0;
        for i in 0..self.rows() {
            let li = lam[i];
            if li > 0.0 {
                let gap = if self.u[i].is_finite() { (self.u[i] - ay[i]).abs() } else { f64::INFINITY };
                err = err.max((li * gap).min(li));
            } else if li < 0.0 {
                let gap = if self.l[i].is_finite() { (ay[i] - self.l[i]).abs() } else { f64::INFINITY };
                err = err.max((-li * gap).min(-li));
            }
        }
        err
    }
}

type Factor = nalgebra::Cholesky<f64, nalgebra::Dyn>;

/// Iterations between convergence checks.
const CHECK_EVERY: usize = 10;

/// Factors `P + σI + Aᵀ diag(ρ) A`. When rounding makes a badly scaled matrix fail,
/// σ is raised relative to the diagonal; σ only weights the proximal term, so the
/// fixed point is unchanged. Returns the σ actually used.
fn factor(st: &Stacked, rho: &DVector<f64>, sigma: f64) -> Option<(Factor, f64)> {
    let nv = st.p.nrows();
    let mut scaled = st.a.clone();
    for (i, mut row) in scaled.row_iter_mut().enumerate() {
        row *= rho[i].sqrt();
    }
    let mut k = st.p.clone();
    k.gemm_tr(1.0, &scaled, &scaled, 1.0);
    symmetrize(&mut k);
    let scale = k.diagonal().amax();
    let mut s = sigma;
    for _ in 0..8 {
        if let Some(c) = (&k + DMatrix::identity(nv, nv) * s).cholesky() {
            return Some((c, s));
        }
        s = (s * 10.0).max(1e-12 * scale);
    }
    None
}

fn rho_vector(st: &Stacked, rho: f64) -> DVector<f64> {
    DVector::from_fn(st.rows(), |i, _| {
        if st.l[i] == f64::NEG_INFINITY && st.u[i] == f64::INFINITY {
            1e-6
        } else if st.l[i] == st.u[i] {
            rho * 1e3
        } else {
            rho
        }
    })
}

pub fn qp_solve_with(instance: &QpInstance, settings: &QpSettings) -> Result<QpResult> {
    instance.validate()?;
    let st = Stacked::build(instance);
    let nv = st.p.nrows();
    let rows = st.rows();

    let mut rho_s = settings.rho;
    let mut rho = rho_vector(&st, rho_s);
    let (mut chol, mut sigma) = factor(&st, &rho, settings.sigma)
        .ok_or_else(|| CoreError::InvalidParameter("qp KKT matrix is not positive definite".into()))?;

    let at = st.a.transpose();
    let mut y: DVector<f64> = DVector::zeros(nv);
    let mut z = st.project(&DVector::zeros(rows));
    let mut lam: DVector<f64> = DVector::zeros(rows);
    let mut status = QpStatus::MaxIterations;
    let mut iterations = 0;
    let mut divergent = 0usize;
    let mut polished = false;
    let mut last_polish_set: Option<Vec<i8>> = None;
    let alpha = settings.alpha;

    let mut lam_prev = lam.clone();
    let mut rhs: DVector<f64> = DVector::zeros(nv);
    let mut scratch: DVector<f64> = DVector::zeros(rows);
    let mut z_tilde: DVector<f64> = DVector::zeros(rows);
    for it in 1..=settings.max_iters {
        iterations = it;
        lam_prev.copy_from(&lam);
        for i in 0..rows {
            scratch[i] = rho[i] * z[i] - lam[i];
        }
        for j in 0..nv {
            rhs[j] = sigma * y[j] - st.q[j];
        }
        rhs.gemv(1.0, &at, &scratch, 1.0);
        chol.solve_mut(&mut rhs);
        z_tilde.gemv(1.0, &st.a, &rhs, 0.0);
        for j in 0..nv {
            y[j] = alpha * rhs[j] + (1.0 - alpha) * y[j];
        }
        for i in 0..rows {
            let relaxed = alpha * z_tilde[i] + (1.0 - alpha) * z[i];
            let next = (relaxed + lam[i] / rho[i]).clamp(st.l[i], st.u[i]);
            lam[i] += rho[i] * (relaxed - next);
            z[i] = next;
        }

        if !y.iter().chain(lam.iter()).all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("qp iterate"));
        }

        // divergence of the multipliers flags infeasible hard rows
        if lam.amax() > settings.dual_divergence {
            divergent += 1;
            if divergent >= settings.dual_divergence_iters {
                status = QpStatus::PrimalInfeasible;
                break;
            }
        } else {
            divergent = 0;
        }

        let check = it % CHECK_EVERY == 0 || it == settings.max_iters;
        let adapt = settings.adaptive_rho_interval > 0 && it % settings.adaptive_rho_interval == 0;
        if !check && !adapt {
            continue;
        }

        let ay = &st.a * &y;
        let prim = (&ay - &z).amax();
        let py = &st.p * &y;
        let atl = &at * &lam;
        let dual = (&py + &st.q + &atl).amax();
        let prim_scale = ay.amax().max(z.amax());
        let dual_scale = py.amax().max(atl.amax()).max(st.q.amax());
        let eps_p = settings.eps_abs + settings.eps_rel * prim_scale;
        let eps_d = settings.eps_abs + settings.eps_rel * dual_scale;
        if check {
            if prim <= eps_p && dual <= eps_d {
                status = QpStatus::Solved;
                break;
            }

            // standard primal infeasibility certificate on the multiplier increment
            let dl = &lam - &lam_prev;
            let dl_norm = dl.amax();
            if dl_norm > 1e-12 {
                let eps_inf = 1e-7;
                let atdl = (&at * &dl).amax();
                let support: f64 = (0..rows)
                    .map(|i| {
                        let up = if dl[i] > 0.0 { st.u[i] * dl[i] } else { 0.0 };
                        let lo = if dl[i] < 0.0 { st.l[i] * dl[i] } else { 0.0 };
                        up + lo
                    })
                    .sum();
                if atdl <= eps_inf * dl_norm && support.is_finite() && support < -eps_inf * dl_norm {
                    status = QpStatus::PrimalInfeasible;
                    break;
                }
            }

            // once the iterates are roughly converged, try to finish on the active set
            let coarse = prim <= 1e-3 * (1.0 + prim_scale) && dual <= 1e-3 * (1.0 + dual_scale);
            if settings.polish && coarse {
                let set = st.active_signature(&z, &lam);
                if last_polish_set.as_ref() != Some(&set) {
                    if let Some((yp, lp)) = st.accept_polish(&z, &lam, settings) {
                        y = yp;
                        lam = lp;
                        polished = true;
                        status = QpStatus::Solved;
                        break;
                    }
                    last_polish_set = Some(set);
                }
            }
        }

        if adapt {
            let pn = prim / prim_scale.max(1e-30);
            let dn = dual / dual_scale.max(1e-30);
            let ratio = (pn / dn.max(1e-30)).sqrt();
            if ratio > 5.0 || ratio < 0.2 {
                rho_s = (rho_s * ratio).clamp(1e-6, 1e6);
                rho = rho_vector(&st, rho_s);
                (chol, sigma) = factor(&st, &rho, settings.sigma).ok_or_else(|| {
                    CoreError::InvalidParameter("qp KKT matrix is not positive definite".into())
                })?;
            }
        }
    }

    if !polished && settings.polish && status != QpStatus::PrimalInfeasible {
        if let Some((yp, lp)) = polish(&st, &z, &lam) {
            let (p_old, d_old, _, _) = st.residuals(&y, &lam);
            let (p_new, d_new, _, _) = st.residuals(&yp, &lp);
            let sign_ok = st.dual_sign_error(&yp, &lp) <= 1e-9 * (1.0 + lp.amax());
            if sign_ok && p_new <= p_old.max(1e-12) && d_new <= d_old.max(1e-12) {
                y = yp;
                lam = lp;
                polished = true;
            }
        }
    }

    let (prim, dual, ps, ds) = st.residuals(&y, &lam);
    if status != QpStatus::PrimalInfeasible {
        let ok = prim <= settings.eps_abs + settings.eps_rel * ps
            && dual <= settings.eps_abs + settings.eps_rel * ds;
        status = if ok { QpStatus::Solved } else { QpStatus::MaxIterations };
    }

    let d = st.d;
    // exact box satisfaction
    let x = DVector::from_fn(d, |i, _| y[i].clamp(instance.lb[i], instance.ub[i]));
    let slacks = DVector::from_fn(st.ns, |j, _| y[d + j].max(0.0));
    let hard_duals = DVector::from_fn(st.nh, |j, _| lam[d + j].max(0.0));
    let box_duals = lam.rows(0, d).into_owned();
    Ok(QpResult {
        objective: instance.objective(&x),
        x,
        hard_duals,
        soft_slacks: slacks,
        box_duals,
        primal_residual: prim,
        dual_residual: dual,
        iterations,
        polished,
        status,
    })
}

/// Solves the equality-constrained KKT system on the guessed active set, with
/// iterative refinement against a small regularization.
fn polish(
    st: &Stacked,
    z: &DVector<f64>,
    lam: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let rows = st.rows();
    let mut active: Vec<(usize, f64)> = Vec::new();
    for i in 0..rows {
        if st.l[i] == st.u[i] || (st.l[i].is_finite() && z[i] - st.l[i] < -lam[i]) {
            active.push((i, st.l[i]));
        } else if st.u[i].is_finite() && st.u[i] - z[i] < lam[i] {
            active.push((i, st.u[i]));
        }
    }
    let nv = st.p.nrows();
    let na = active.len();
    let n = nv + na;
    let delta = 1e-10;
    let mut kkt = DMatrix::zeros(n, n);
    kkt.view_mut((0, 0), (nv, nv)).copy_from(&st.p);
    let mut rhs = DVector::zeros(n);
    rhs.rows_mut(0, nv).copy_from(&(-&st.q));
    for (k, &(i, bound)) in active.iter().enumerate() {
        for j in 0..nv {
            kkt[(nv + k, j)] = st.a[(i, j)];
            kkt[(j, nv + k)] = st.a[(i, j)];
        }
        rhs[nv + k] = bound;
    }
    let mut reg = kkt.clone();
    for i in 0..nv {
        reg[(i, i)] += delta;
    }
    for k in 0..na {
        reg[(nv + k, nv + k)] -= delta;
    }
    let lu = reg.lu();
    let mut sol = lu.solve(&rhs)?;
    for _ in 0..5 {
        let r = &rhs - &kkt * &sol;
        if r.amax() < 1e-15 {
            break;
        }
        sol += lu.solve(&r)?;
    }
    if !sol.iter().all(|v| v.is_finite()) {
        return None;
    }
    let yp = sol.rows(0, nv).into_owned();
    let mut lp = DVector::zeros(rows);
    for (k, &(i, _)) in active.iter().enumerate() {
        lp[i] = sol[nv + k];
    }
    Some((yp, lp))
}

/// Clips the eigenvalues of symmetric `h` from below at `floor`; returns `h` unchanged
/// when it already satisfies the floor.
pub fn psd_repair(h: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let mut s = h.clone();
    symmetrize(&mut s);
    if s.nrows() == 0 {
        return s;
    }
    let eig = s.clone().symmetric_eigen();
    if eig.eigenvalues.min() >= floor {
        return h.clone();
    }
    let clipped = eig.eigenvalues.map(|l| l.max(floor));
    let mut out = &eig.eigenvectors * DMatrix::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    symmetrize(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    #[test]
    fn unconstrained_quadratic() {
        let c = dv(&[1.0, -2.0, 0.5]);
        let inst = QpInstance::new(DMatrix::identity(3, 3), -&c);
        let res = qp_solve(&inst, 1e-10, 1000).unwrap();
        assert_eq!(res.status, QpStatus::Solved);
        assert!((res.x - c).amax() < 1e-9);
    }

    #[test]
    fn one_dimensional_active_row() {
        // min ½u² − u s.t. u ≤ 0.5: u* = 0.5, multiplier 0.5
        let inst = QpInstance::new(DMatrix::identity(1, 1), dv(&[-1.0]))
            .with_hard(DMatrix::from_element(1, 1, 1.0), dv(&[0.5]));
        let res = qp_solve(&inst, 1e-10, 1000).unwrap();
        assert_eq!(res.status, QpStatus::Solved);
        assert!((res.x[0] - 0.5).abs() < 1e-10);
        assert!((res.hard_duals[0] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn box_is_exact() {
        let inst = QpInstance::new(DMatrix::identity(2, 2), dv(&[-10.0, 10.0]))
            .with_box(dv(&[-1.0, -1.0]), dv(&[1.0, 1.0]));
        let res = qp_solve(&inst, 1e-9, 1000).unwrap();
        assert_eq!(res.x, dv(&[1.0, -1.0]));
        assert!(res.box_duals[0] > 0.0 && res.box_duals[1] < 0.0);
    }

    #[test]
    fn soft_rows_use_exact_penalty() {
        // min ½(u − 2)² s.t. u ≤ 1 soft with weight w: for w ≥ 1 the row holds exactly
        let h = DMatrix::identity(1, 1);
        let g = dv(&[-2.0]);
        let a = DMatrix::from_element(1, 1, 1.0);
        let strong = QpInstance::new(h.clone(), g.clone()).with_soft(a.clone(), dv(&[1.0]), dv(&[5.0]));
        let res = qp_solve(&strong, 1e-10, 2000).unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-9);
        assert!(res.soft_slacks[0] < 1e-9);
        // a weak penalty trades off: optimum at u = 2 − w
        let weak = QpInstance::new(h, g).with_soft(a, dv(&[1.0]), dv(&[0.4]));
        let res = qp_solve(&weak, 1e-10, 2000).unwrap();
        assert!((res.x[0] - 1.6).abs() < 1e-8);
        assert!((res.soft_slacks[0] - 0.6).abs() < 1e-8);
    }

    #[test]
    fn infeasible_hard_rows_are_flagged() {
        // u ≤ −1 and −u ≤ −1 (u ≥ 1)
        let inst = QpInstance::new(DMatrix::identity(1, 1), dv(&[0.0]))
            .with_hard(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), dv(&[-1.0, -1.0]));
        let res = qp_solve(&inst, 1e-9, 20000).unwrap();
        assert_eq!(res.status, QpStatus::PrimalInfeasible);
    }

    #[test]
    fn validation_errors() {
        let inst = QpInstance::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]), dv(&[0.0, 0.0]));
        assert!(qp_solve(&inst, 1e-8, 10).is_err());
        let inst = QpInstance::new(DMatrix::identity(2, 2), dv(&[0.0, 0.0])).with_box(dv(&[1.0, 0.0]), dv(&[0.0, 0.0]));
        assert!(qp_solve(&inst, 1e-8, 10).is_err());
    }

    /// Random feasible instance: box and rows built around a strictly feasible point.
    pub(crate) fn random_instance(rng: &mut ChaCha8Rng, d: usize, rows: usize) -> QpInstance {
        let m = DMatrix::from_fn(d, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let h = &m * m.transpose() + DMatrix::identity(d, d) * 0.1;
        let g = DVector::from_fn(d, |_, _| (rng.random::<f64>() * 2.0 - 1.0) * 5.0);
        let x0 = DVector::from_fn(d, |_, _| rng.random::<f64>() * 0.5 - 0.25);
        let a = DMatrix::from_fn(rows, d, |_, _| rng.random::<f64>() * 2.0 - 1.0);
        let b = &a * &x0 + DVector::from_fn(rows, |_, _| rng.random::<f64>() * 0.5);
        QpInstance::new(h, g)
            .with_box(x0.map(|v| v - 1.0), x0.map(|v| v + 1.0))
            .with_hard(a, b)
    }

    /// Projected gradient on the dual of the instance with all constraints as rows.
    pub(crate) fn dual_projected_gradient(inst: &QpInstance, iters: usize) -> DVector<f64> {
        let d = inst.dim();
        let nh = inst.hard_a.nrows();
        let mut c = DMatrix::zeros(nh + 2 * d, d);
        let mut cb = DVector::zeros(nh + 2 * d);
        c.view_mut((0, 0), (nh, d)).copy_from(&inst.hard_a);
        cb.rows_mut(0, nh).copy_from(&inst.hard_b);
        for i in 0..d {
            c[(nh + i, i)] = 1.0;
            cb[nh + i] = inst.ub[i];
            c[(nh + d + i, i)] = -1.0;
            cb[nh + d + i] = -inst.lb[i];
        }
        let hinv = inst.h.clone().try_inverse().unwrap();
        let q = &c * &hinv * c.transpose();
        let step = 1.0 / sym_eigenvalues(&q).last().copied().unwrap();
        let mut mu = DVector::zeros(c.nrows());
        let mut prev = mu.clone();
        for k in 0..iters {
            // accelerated projected gradient ascent
            let beta = k as f64 / (k as f64 + 3.0);
            let yv = &mu + (&mu - &prev) * beta;
            let x = -&hinv * (&inst.g + c.transpose() * &yv);
            let grad = &c * &x - &cb;
            prev = mu.clone();
            mu = (yv + grad * step).map(|v| v.max(0.0));
        }
        -&hinv * (&inst.g + c.transpose() * &mu)
    }

    #[test]
    fn matches_projected_gradient_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let inst = random_instance(&mut rng, 6, 10);
            let res = qp_solve(&inst, 1e-10, 10000).unwrap();
            assert_eq!(res.status, QpStatus::Solved);
            let oracle = dual_projected_gradient(&inst, 100_000);
            let gap = (inst.objective(&res.x) - inst.objective(&oracle)).abs();
            assert!(gap <= 1e-6, "gap {gap}");
            for (i, yv) in res.hard_duals.iter().enumerate() {
                let slack = inst.hard_b[i] - inst.hard_a.row(i).dot(&res.x.transpose());
                assert!((yv * slack).abs() <= 1e-9);
                assert!(slack >= -1e-9);
            }
            assert!((res.objective - inst.objective(&res.x)).abs() <= 1e-8);
        }
    }

    #[test]
    fn scaling_leaves_argmin_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inst = random_instance(&mut rng, 5, 6);
        let base = qp_solve(&inst, 1e-10, 10000).unwrap();
        let scaled = QpInstance {
            h: &inst.h * 7.5,
            g: &inst.g * 7.5,
            ..inst.clone()
        };
        let res = qp_solve(&scaled, 7.5e-10, 10000).unwrap();
        assert!((res.x - base.x).amax() < 1e-7);
    }

    #[test]
    fn psd_repair_examples() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(psd_repair(&id, 1e-8), id);
        let h = DMatrix::from_diagonal(&dv(&[1.0, -0.5]));
        let r = psd_repair(&h, 0.0);
        assert!((r - DMatrix::from_diagonal(&dv(&[1.0, 0.0]))).amax() < 1e-15);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let m = DMatrix::from_fn(4, 4, |_, _| rng.random::<f64>() - 0.5);
        let h = &m + m.transpose();
        let r = psd_repair(&h, 0.1);
        assert!(sym_eigenvalues(&r)[0] >= 0.1 - 1e-12);
        // only upward eigenvalue moves
        assert!(sym_eigenvalues(&(&r - &h))[0] >= -1e-12);
    }
}
