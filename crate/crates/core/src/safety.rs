//! Barrier functions over the physical state, their Lipschitz constants, linearized
//! (tightened) barrier rows for the MPC, and runtime safety monitoring.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Maps the physical state to a planar position on which barriers act.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "map", rename_all = "snake_case")]
pub enum PositionMap {
    /// Position coordinates are the listed state entries.
    Selector { indices: Vec<usize> },
    /// End-effector of a planar three-link arm whose joint angles start at `first_joint`.
    Planar3R { lengths: [f64; 3], first_joint: usize },
}

impl PositionMap {
    pub fn dim(&self) -> usize {
        match self {
            PositionMap::Selector { indices } => indices.len(),
            PositionMap::Planar3R { .. } => 2,
        }
    }

    pub fn position(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            PositionMap::Selector { indices } => {
                DVector::from_iterator(indices.len(), indices.iter().map(|&i| x[i]))
            }
            PositionMap::Planar3R { lengths, first_joint } => {
                let q = [x[*first_joint], x[first_joint + 1], x[first_joint + 2]];
                planar3r_fk(lengths, &q)
            }
        }
    }

    /// Jacobian of the position with respect to the full state (`dim × n`).
    pub fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        match self {
            PositionMap::Selector { indices } => {
                let mut j = DMatrix::zeros(indices.len(), n);
                for (r, &i) in indices.iter().enumerate() {
                    j[(r, i)] = 1.0;
                }
                j
            }
            PositionMap::Planar3R { lengths, first_joint } => {
                let q = [x[*first_joint], x[first_joint + 1], x[first_joint + 2]];
                let mut j = DMatrix::zeros(2, n);
                let angles = [q[0], q[0] + q[1], q[0] + q[1] + q[2]];
                for col in 0..3 {
                    for link in col..3 {
                        j[(0, first_joint + col)] -= lengths[link] * angles[link].sin();
                        j[(1, first_joint + col)] += lengths[link] * angles[link].cos();
                    }
                }
                j
            }
        }
    }

    /// Global Lipschitz constant of the map.
    pub fn lipschitz(&self) -> f64 {
        match self {
            PositionMap::Selector { .. } => 1.0,
            // column i of the Jacobian has norm at most the reach beyond joint i
            PositionMap::Planar3R { lengths, .. } => {
                let reach = |i: usize| lengths[i..].iter().sum::<f64>();
                (0..3).map(|i| reach(i).powi(2)).sum::<f64>().sqrt()
            }
        }
    }
}

/// Forward kinematics of a planar three-link arm with joints at the origin.
pub fn planar3r_fk(lengths: &[f64; 3], q: &[f64; 3]) -> DVector<f64> {
    let mut angle = 0.0;
    let (mut px, mut py) = (0.0, 0.0);
    for i in 0..3 {
        angle += q[i];
        px += lengths[i] * angle.cos();
        py += lengths[i] * angle.sin();
    }
    DVector::from_row_slice(&[px, py])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BarrierKind {
    /// `h = ‖p − c‖² − d²`.
    Circle { center: Vec<f64>, d_safe: f64 },
    /// `h = a·p − b` with unit `a`.
    Halfspace { normal: Vec<f64>, offset: f64 },
    /// Distance to another agent whose position is frozen over the horizon.
    Pairwise { other: Vec<f64>, d_min: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Barrier {
    pub kind: BarrierKind,
    pub map: PositionMap,
    /// Radius of the disk footprint around the mapped point.
    #[serde(default)]
    pub footprint: f64,
    /// Whether the pointwise `h ≥ 0` row is a hard constraint.
    #[serde(default = "default_true")]
    pub hard: bool,
}

fn default_true() -> bool {
    true
}

impl Barrier {
    pub fn circle(center: Vec<f64>, d_safe: f64, indices: Vec<usize>) -> Result<Self> {
        if !(d_safe > 0.0) || center.len() != indices.len() {
            return Err(CoreError::InvalidParameter(
                "circle barrier needs d_safe > 0 and a center matching the selector".into(),
            ));
        }
        Ok(Self {
            kind: BarrierKind::Circle { center, d_safe },
            map: PositionMap::Selector { indices },
            footprint: 0.0,
            hard: true,
        })
    }

    pub fn halfspace(normal: Vec<f64>, offset: f64, indices: Vec<usize>) -> Result<Self> {
        let norm = normal.iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 || normal.len() != indices.len() {
            return Err(CoreError::InvalidParameter(
                "halfspace barrier needs a unit normal matching the selector".into(),
            ));
        }
        Ok(Self {
            kind: BarrierKind::Halfspace { normal, offset },
            map: PositionMap::Selector { indices },
            footprint: 0.0,
            hard: true,
        })
    }

    /// Two opposing halfspaces `lower ≤ a·p ≤ upper`.
    pub fn corridor(normal: Vec<f64>, lower: f64, upper: f64, indices: Vec<usize>) -> Result<[Self; 2]> {
        let flipped: Vec<f64> = normal.iter().map(|v| -v).collect();
        Ok([
            Self::halfspace(normal, lower, indices.clone())?,
            Self::halfspace(flipped, -upper, indices)?,
        ])
    }

    pub fn with_map(mut self, map: PositionMap) -> Self {
        self.map = map;
        self
    }

    pub fn with_footprint(mut self, radius: f64) -> Self {
        self.footprint = radius.max(0.0);
        self
    }

    pub fn soft(mut self) -> Self {
        self.hard = false;
        self
    }

    /// Updates the frozen position of the other agent in a pairwise barrier.
    pub fn set_other(&mut self, position: &[f64]) {
        if let BarrierKind::Pairwise { other, .. } = &mut self.kind {
            other.clear();
            other.extend_from_slice(position);
        }
    }

    fn center_radius(&self) -> Option<(&[f64], f64)> {
        match &self.kind {
            BarrierKind::Circle { center, d_safe } => Some((center, d_safe + self.footprint)),
            BarrierKind::Pairwise { other, d_min } => Some((other, d_min + self.footprint)),
            BarrierKind::Halfspace { .. } => None,
        }
    }

    /// Gradient of `h` with respect to the mapped position.
    fn position_gradient(&self, p: &DVector<f64>) -> DVector<f64> {
        match &self.kind {
            BarrierKind::Halfspace { normal, .. } => DVector::from_row_slice(normal),
            _ => {
                let (c, _) = self.center_radius().expect("radial barrier");
                DVector::from_iterator(p.len(), p.iter().zip(c).map(|(pi, ci)| 2.0 * (pi - ci)))
            }
        }
    }
}

/// `h(x)`; nonnegative inside the safe set.
pub fn h_value(barrier: &Barrier, x: &DVector<f64>) -> f64 {
    let p = barrier.map.position(x);
    match &barrier.kind {
        BarrierKind::Halfspace { normal, offset } => {
            p.iter().zip(normal).map(|(pi, ai)| pi * ai).sum::<f64>() - offset - barrier.footprint
        }
        _ => {
            let (c, r) = barrier.center_radius().expect("radial barrier");
            p.iter().zip(c).map(|(pi, ci)| (pi - ci).powi(2)).sum::<f64>() - r * r
        }
    }
}

/// `∇h(x)` over the full physical state.
pub fn h_gradient(barrier: &Barrier, x: &DVector<f64>) -> DVector<f64> {
    let p = barrier.map.position(x);
    barrier.map.jacobian(x).transpose() * barrier.position_gradient(&p)
}

/// Lipschitz constant of `h` on the ball of radius `delta` around `x_nom_next`.
pub fn local_lipschitz(barrier: &Barrier, x_nom_next: &DVector<f64>, delta: f64) -> f64 {
    let lmap = barrier.map.lipschitz();
    match barrier.center_radius() {
        None => lmap,
        Some((c, _)) => {
            let p = barrier.map.position(x_nom_next);
            let dist = p.iter().zip(c).map(|(pi, ci)| (pi - ci).powi(2)).sum::<f64>().sqrt();
            2.0 * (dist + lmap * delta.max(0.0)) * lmap
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CbfParams {
    pub alpha_cbf: f64,
    pub use_local_lipschitz: bool,
    pub global_lh: f64,
}

impl Default for CbfParams {
    fn default() -> Self {
        Self {
            alpha_cbf: 0.2,
            use_local_lipschitz: true,
            global_lh: 1.0,
        }
    }
}

impl CbfParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_cbf > 0.0 && self.alpha_cbf <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "alpha_cbf {} outside (0, 1]",
                self.alpha_cbf
            )));
        }
        if !(self.global_lh > 0.0) {
            return Err(CoreError::InvalidParameter("global L_h must be positive".into()));
        }
        Ok(())
    }

    pub fn lipschitz(&self, barrier: &Barrier, x_nom_next: &DVector<f64>, delta: f64) -> f64 {
        if self.use_local_lipschitz {
            local_lipschitz(barrier, x_nom_next, delta)
        } else {
            self.global_lh
        }
    }
}

/// Linear inequality `coeffs · x ≥ rhs` on a predicted physical state.
#[derive(Debug, Clone, PartialEq)]
pub struct CbfRow {
    pub coeffs: DVector<f64>,
    pub rhs: f64,
}

impl CbfRow {
    pub fn satisfied_by(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.coeffs.dot(x) >= self.rhs - tol
    }
}

/// Gradient used for linearization, replacing the degenerate gradient at an obstacle
/// center with the outward direction of `fallback` (or the first position axis).
fn linearization_gradient(barrier: &Barrier, x_bar: &DVector<f64>, fallback: Option<&DVector<f64>>) -> DVector<f64> {
    if let Some((c, r)) = barrier.center_radius() {
        let p = barrier.map.position(x_bar);
        let dist = p.iter().zip(c).map(|(pi, ci)| (pi - ci).powi(2)).sum::<f64>().sqrt();
        if dist < 1e-6 {
            let mut dir = match fallback {
                Some(prev) => {
                    let pp = barrier.map.position(prev);
                    DVector::from_iterator(pp.len(), pp.iter().zip(c).map(|(a, b)| a - b))
                }
                None => DVector::zeros(p.len()),
            };
            if dir.norm() < 1e-9 {
                dir = DVector::zeros(p.len());
                dir[0] = 1.0;
            }
            let g = dir.normalize() * (2.0 * r);
            return barrier.map.jacobian(x_bar).transpose() * g;
        }
    }
    h_gradient(barrier, x_bar)
}

/// First-order barrier row about `x_bar`:
/// `h(x̄) + ∇h(x̄)·(x − x̄) ≥ (1 − α) h(x_current) + L_h δ`.
pub fn cbf_row(
    barrier: &Barrier,
    params: &CbfParams,
    x_current: &DVector<f64>,
    x_bar: &DVector<f64>,
    delta: f64,
) -> CbfRow {
    cbf_row_with_fallback(barrier, params, x_current, x_bar, delta, None)
}

pub fn cbf_row_with_fallback(
    barrier: &Barrier,
    params: &CbfParams,
    x_current: &DVector<f64>,
    x_bar: &DVector<f64>,
    delta: f64,
    fallback: Option<&DVector<f64>>,
) -> CbfRow {
    let grad = linearization_gradient(barrier, x_bar, fallback);
    let lh = params.lipschitz(barrier, x_bar, delta);
    let target = (1.0 - params.alpha_cbf) * h_value(barrier, x_current) + lh * delta;
    CbfRow {
        rhs: target - h_value(barrier, x_bar) + grad.dot(x_bar),
        coeffs: grad,
    }
}

/// First-order row for the pointwise condition `h(x) ≥ margin`.
pub fn pointwise_row(barrier: &Barrier, x_bar: &DVector<f64>, margin: f64, fallback: Option<&DVector<f64>>) -> CbfRow {
    let grad = linearization_gradient(barrier, x_bar, fallback);
    CbfRow {
        rhs: margin - h_value(barrier, x_bar) + grad.dot(x_bar),
        coeffs: grad,
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SafetyReport {
    pub h: Vec<f64>,
    pub hard_violation: Vec<bool>,
    pub decay_miss: Vec<bool>,
}

impl SafetyReport {
    pub fn min_h(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn hard_violations(&self) -> usize {
        self.hard_violation.iter().filter(|v| **v).count()
    }

    pub fn decay_misses(&self) -> usize {
        self.decay_miss.iter().filter(|v| **v).count()
    }
}

/// Evaluates every barrier on the true successor state.
pub fn monitor_step(
    barriers: &[Barrier],
    x_true_next: &DVector<f64>,
    x_current: &DVector<f64>,
    params: &CbfParams,
) -> SafetyReport {
    let mut report = SafetyReport::default();
    for b in barriers {
        let h_next = h_value(b, x_true_next);
        let h_cur = h_value(b, x_current);
        report.h.push(h_next);
        report.hard_violation.push(h_next < 0.0);
        report.decay_miss.push(h_next < (1.0 - params.alpha_cbf) * h_cur);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn unit_circle() -> Barrier {
        Barrier::circle(vec![0.0, 0.0], 1.0, vec![0, 1]).unwrap()
    }

    #[test]
    fn h_value_examples() {
        assert_eq!(h_value(&unit_circle(), &dv(&[2.0, 0.0])), 3.0);
        assert_eq!(h_value(&unit_circle(), &dv(&[0.0, -1.0])), 0.0);
        let half = Barrier::halfspace(vec![0.0, 1.0], -1.0, vec![0, 1]).unwrap();
        assert_eq!(h_value(&half, &dv(&[5.0, 0.0])), 1.0);
        assert!(Barrier::halfspace(vec![0.0, 2.0], 0.0, vec![0, 1]).is_err());
        assert!(Barrier::circle(vec![0.0], 0.0, vec![0]).is_err());
    }

    #[test]
    fn gradient_examples() {
        let b = unit_circle();
        assert_eq!(h_gradient(&b, &dv(&[0.0, 0.0])), dv(&[0.0, 0.0]));
        assert_eq!(h_gradient(&b, &dv(&[1.0, 0.0])), dv(&[2.0, 0.0]));
        // embedded in a larger state
        let b = Barrier::circle(vec![1.0, 1.0], 0.5, vec![0, 2]).unwrap();
        assert_eq!(h_gradient(&b, &dv(&[2.0, 9.0, 1.0, 4.0])), dv(&[2.0, 0.0, 0.0, 0.0]));
    }

    fn fd_gradient(b: &Barrier, x: &DVector<f64>) -> DVector<f64> {
        let h = 1e-6;
        DVector::from_fn(x.len(), |i, _| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            (h_value(b, &xp) - h_value(b, &xm)) / (2.0 * h)
        })
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let barriers = vec![
            Barrier::circle(vec![0.3, -0.2], 0.4, vec![0, 1]).unwrap().with_footprint(0.1),
            Barrier::halfspace(vec![0.6, 0.8], 0.1, vec![0, 1]).unwrap(),
            Barrier::circle(vec![1.0, 1.5], 0.3, vec![0, 1])
                .unwrap()
                .with_map(PositionMap::Planar3R { lengths: [1.0, 0.8, 0.5], first_joint: 0 }),
        ];
        for b in &barriers {
            for _ in 0..50 {
                let x = DVector::from_fn(4, |_, _| rng.random::<f64>() * 4.0 - 2.0);
                let diff = h_gradient(b, &x) - fd_gradient(b, &x);
                assert!(diff.amax() < 1e-6, "{:?}", diff);
            }
        }
    }

    #[test]
    fn local_lipschitz_examples() {
        let b = unit_circle();
        let on = dv(&[1.0, 0.0]);
        assert_eq!(local_lipschitz(&b, &on, 0.0), 2.0);
        assert_eq!(local_lipschitz(&b, &on, 0.5), 3.0);
        let half = Barrier::halfspace(vec![1.0, 0.0], 3.0, vec![0, 1]).unwrap();
        assert_eq!(local_lipschitz(&half, &dv(&[-7.0, 2.0]), 9.0), 1.0);
    }

    #[test]
    fn local_lipschitz_dominates_gradient_on_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cases = [
            (unit_circle(), 2usize),
            (
                Barrier::circle(vec![1.2, 0.4], 0.3, vec![0, 1])
                    .unwrap()
                    .with_map(PositionMap::Planar3R { lengths: [1.0, 1.0, 1.0], first_joint: 0 }),
                3,
            ),
        ];
        for (b, n) in &cases {
            for _ in 0..5 {
                let center = DVector::from_fn(*n, |_, _| rng.random::<f64>() * 3.0 - 1.5);
                let delta = rng.random::<f64>();
                let bound = local_lipschitz(b, &center, delta);
                for _ in 0..1000 {
                    let dir = DVector::from_fn(*n, |_, _| rng.random::<f64>() - 0.5).normalize();
                    let y = &center + dir * (delta * rng.random::<f64>());
                    assert!(h_gradient(b, &y).norm() <= bound + 1e-12);
                }
            }
        }
    }

    #[test]
    fn halfspace_row_is_exact() {
        let half = Barrier::halfspace(vec![0.6, -0.8], 0.2, vec![0, 1]).unwrap();
        let params = CbfParams { alpha_cbf: 0.3, ..Default::default() };
        let x_cur = dv(&[2.0, 0.5]);
        let row = cbf_row(&half, &params, &x_cur, &dv(&[10.0, -3.0]), 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let x = DVector::from_fn(2, |_, _| rng.random::<f64>() * 6.0 - 3.0);
            let lhs = h_value(&half, &x);
            let exact = lhs >= 0.7 * h_value(&half, &x_cur) + 0.05;
            let linear = row.coeffs.dot(&x) >= row.rhs;
            assert_eq!(exact, linear);
            assert!((row.coeffs.dot(&x) - row.rhs - (lhs - 0.7 * h_value(&half, &x_cur) - 0.05)).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_decay_reduces_to_pointwise_row() {
        let b = unit_circle();
        let params = CbfParams { alpha_cbf: 1.0, ..Default::default() };
        let x_bar = dv(&[3.0, 4.0]);
        let row = cbf_row(&b, &params, &dv(&[-7.0, 1.0]), &x_bar, 0.0);
        let point = pointwise_row(&b, &x_bar, 0.0, None);
        assert_eq!(row, point);
    }

    #[test]
    fn circle_row_matches_direct_evaluation() {
        let b = Barrier::circle(vec![1.0, 0.0], 0.5, vec![0, 1]).unwrap();
        let params = CbfParams { alpha_cbf: 0.25, use_local_lipschitz: true, global_lh: 1.0 };
        let x_cur = dv(&[3.0, 0.0]);
        let x_bar = dv(&[2.5, 0.5]);
        let delta = 0.1;
        let row = cbf_row(&b, &params, &x_cur, &x_bar, delta);
        // at x̄ the linearization is exact: lhs − rhs = h(x̄) − (1 − α) h(x_cur) − L δ
        let lh = 2.0 * ((1.5f64.powi(2) + 0.25).sqrt() + delta);
        let expected = h_value(&b, &x_bar) - 0.75 * h_value(&b, &x_cur) - lh * delta;
        assert!((row.coeffs.dot(&x_bar) - row.rhs - expected).abs() < 1e-12);
        let x = dv(&[2.6, 0.4]);
        let lin = h_value(&b, &x_bar) + h_gradient(&b, &x_bar).dot(&(&x - &x_bar));
        assert!((row.coeffs.dot(&x) - row.rhs - (lin - 0.75 * h_value(&b, &x_cur) - lh * delta)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_center_uses_fallback_direction() {
        let b = unit_circle();
        let params = CbfParams::default();
        let row = cbf_row_with_fallback(&b, &params, &dv(&[2.0, 0.0]), &dv(&[0.0, 0.0]), 0.0, Some(&dv(&[0.0, -3.0])));
        assert!(row.coeffs[1] < 0.0 && row.coeffs[0].abs() < 1e-12);
        let row = cbf_row(&b, &params, &dv(&[2.0, 0.0]), &dv(&[0.0, 0.0]), 0.0);
        assert!(row.coeffs[0] > 0.0);
    }

    #[test]
    fn monitor_examples() {
        let b = vec![unit_circle(), Barrier::halfspace(vec![1.0, 0.0], -5.0, vec![0, 1]).unwrap()];
        let params = CbfParams { alpha_cbf: 0.5, ..Default::default() };
        let r = monitor_step(&b, &dv(&[3.0, 0.0]), &dv(&[3.0, 0.0]), &params);
        assert_eq!((r.hard_violations(), r.decay_misses()), (0, 0));
        let r = monitor_step(&b, &dv(&[0.2, 0.1]), &dv(&[3.0, 0.0]), &params);
        assert_eq!(r.hard_violations(), 1);
        assert!(r.min_h() < 0.0);
    }

    #[test]
    fn decay_miss_count_matches_recount() {
        let b = vec![unit_circle()];
        let params = CbfParams { alpha_cbf: 0.3, ..Default::default() };
        let xs: Vec<DVector<f64>> = (0..40)
            .map(|k| {
                let r = 3.0 - 0.05 * k as f64 + 0.3 * (k as f64 * 1.3).sin();
                dv(&[r, 0.0])
            })
            .collect();
        let mut monitored = 0;
        let mut recount = 0;
        for k in 0..xs.len() - 1 {
            monitored += monitor_step(&b, &xs[k + 1], &xs[k], &params).decay_misses();
            let (hc, hn) = (xs[k][0].powi(2) - 1.0, xs[k + 1][0].powi(2) - 1.0);
            if hn < 0.7 * hc {
                recount += 1;
            }
        }
        assert_eq!(monitored, recount);
        assert!(recount > 0);
    }

    #[test]
    fn planar3r_jacobian_and_lipschitz() {
        let map = PositionMap::Planar3R { lengths: [1.0, 1.0, 1.0], first_joint: 0 };
        let x = dv(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(map.position(&x), dv(&[3.0, 0.0]));
        let j = map.jacobian(&x);
        assert_eq!(j.row(1).columns(0, 3).into_owned(), DMatrix::from_row_slice(1, 3, &[3.0, 2.0, 1.0]));
        assert!((map.lipschitz() - 14f64.sqrt()).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn rhs_nondecreasing_in_delta(px in -3.0f64..3.0, py in -3.0f64..3.0, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
                let b = Barrier::circle(vec![0.5, 0.5], 0.7, vec![0, 1]).unwrap();
                let params = CbfParams::default();
                let x = dv(&[px, py]);
                let (lo, hi) = if d1 < d2 { (d1, d2) } else { (d2, d1) };
                let r_lo = cbf_row(&b, &params, &dv(&[2.0, 2.0]), &x, lo);
                let r_hi = cbf_row(&b, &params, &dv(&[2.0, 2.0]), &x, hi);
                prop_assert_eq!(&r_lo.coeffs, &r_hi.coeffs);
                prop_assert!(r_hi.rhs >= r_lo.rhs);
            }
        }
    }
}
