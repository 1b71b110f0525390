use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::{Plant, ShiftSpec};
use crate::error::{check_len, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ManipulatorParams {
    pub masses_kg: [f64; 3],
    pub lengths_m: [f64; 3],
    pub gravity_mps2: f64,
    /// Symmetric joint torque limit in N·m.
    pub max_torque_nm: f64,
}

impl Default for ManipulatorParams {
    fn default() -> Self {
        Self {
            masses_kg: [0.6; 3],
            lengths_m: [1.0; 3],
            gravity_mps2: 9.81,
            max_torque_nm: 60.0,
        }
    }
}

/// Inertial coefficients of the planar chain (uniform slender links, centroid at
/// mid-length, centroidal inertia `m l² / 12`).
#[derive(Debug, Clone, Copy)]
struct Coeffs {
    a: [f64; 3],
    b12: f64,
    b23: f64,
    b13: f64,
}

impl Coeffs {
    fn new(p: &ManipulatorParams) -> Self {
        let [m1, m2, m3] = p.masses_kg;
        let [l1, l2, l3] = p.lengths_m;
        let (r1, r2, r3) = (0.5 * l1, 0.5 * l2, 0.5 * l3);
        let inertia = |m: f64, l: f64| m * l * l / 12.0;
        Self {
            a: [
                inertia(m1, l1) + m1 * r1 * r1 + (m2 + m3) * l1 * l1,
                inertia(m2, l2) + m2 * r2 * r2 + m3 * l2 * l2,
                inertia(m3, l3) + m3 * r3 * r3,
            ],
            b12: (m2 * r2 + m3 * l2) * l1,
            b23: m3 * r3 * l2,
            b13: m3 * r3 * l1,
        }
    }
}

/// Mass matrix `M(θ)`.
pub fn mass_matrix(p: &ManipulatorParams, q: &[f64; 3]) -> Matrix3<f64> {
    let c = Coeffs::new(p);
    let (c2, c3, c23) = (q[1].cos(), q[2].cos(), (q[1] + q[2]).cos());
    let [a1, a2, a3] = c.a;
    let m11 = a1 + a2 + a3 + 2.0 * c.b12 * c2 + 2.0 * c.b23 * c3 + 2.0 * c.b13 * c23;
    let m12 = a2 + a3 + c.b12 * c2 + 2.0 * c.b23 * c3 + c.b13 * c23;
    let m13 = a3 + c.b23 * c3 + c.b13 * c23;
    let m22 = a2 + a3 + 2.0 * c.b23 * c3;
    let m23 = a3 + c.b23 * c3;
    Matrix3::new(m11, m12, m13, m12, m22, m23, m13, m23, a3)
}

/// `∂M/∂θ_k` for `k = 0, 1, 2`.
fn mass_matrix_partials(p: &ManipulatorParams, q: &[f64; 3]) -> [Matrix3<f64>; 3] {
    let c = Coeffs::new(p);
    let (s2, s3, s23) = (q[1].sin(), q[2].sin(), (q[1] + q[2]).sin());
    let d2 = {
        let m11 = -2.0 * c.b12 * s2 - 2.0 * c.b13 * s23;
        let m12 = -c.b12 * s2 - c.b13 * s23;
        let m13 = -c.b13 * s23;
        Matrix3::new(m11, m12, m13, m12, 0.0, 0.0, m13, 0.0, 0.0)
    };
    let d3 = {
        let m11 = -2.0 * c.b23 * s3 - 2.0 * c.b13 * s23;
        let m12 = -2.0 * c.b23 * s3 - c.b13 * s23;
        let m13 = -c.b23 * s3 - c.b13 * s23;
        let m22 = -2.0 * c.b23 * s3;
        let m23 = -c.b23 * s3;
        Matrix3::new(m11, m12, m13, m12, m22, m23, m13, m23, 0.0)
    };
    [Matrix3::zeros(), d2, d3]
}

/// Coriolis matrix from the Christoffel symbols of `M`.
pub fn coriolis_matrix(p: &ManipulatorParams, q: &[f64; 3], qd: &[f64; 3]) -> Matrix3<f64> {
    let dm = mass_matrix_partials(p, q);
    let mut c = Matrix3::zeros();
    for k in 0..3 {
        for j in 0..3 {
            let mut acc = 0.0;
            for i in 0..3 {
                acc += 0.5 * (dm[i][(k, j)] + dm[j][(k, i)] - dm[k][(i, j)]) * qd[i];
            }
            c[(k, j)] = acc;
        }
    }
    c
}

/// Gravity torque `∂V/∂θ` with gravity acting along the negative in-plane vertical.
pub fn gravity_vector(p: &ManipulatorParams, q: &[f64; 3]) -> Vector3<f64> {
    let phi = [q[0], q[0] + q[1], q[0] + q[1] + q[2]];
    let mut g = Vector3::zeros();
    for k in 0..3 {
        let mut acc = 0.0;
        for i in k..3 {
            // centroid of link i: full links before it plus half of itself
            for j in k..i {
                acc += p.masses_kg[i] * p.lengths_m[j] * phi[j].cos();
            }
            acc += p.masses_kg[i] * 0.5 * p.lengths_m[i] * phi[i].cos();
        }
        g[k] = p.gravity_mps2 * acc;
    }
    g
}

/// Planar three-link arm with state `(θ, θ̇)` and joint torque inputs.
#[derive(Debug, Clone)]
pub struct ManipulatorPlant {
    nominal: ManipulatorParams,
    shifted: ManipulatorParams,
    resistive_fraction: f64,
    active: bool,
}

impl ManipulatorPlant {
    pub fn new(nominal: ManipulatorParams, shift: &ShiftSpec) -> Result<Self> {
        shift.validate()?;
        if nominal.masses_kg.iter().chain(nominal.lengths_m.iter()).any(|v| !(*v > 0.0)) {
            return Err(CoreError::InvalidParameter("link masses and lengths must be positive".into()));
        }
        let mut shifted = nominal;
        for m in shifted.masses_kg.iter_mut() {
            *m *= shift.mass_scale;
        }
        Ok(Self {
            nominal,
            shifted,
            resistive_fraction: shift.resistive_fraction,
            active: false,
        })
    }

    pub fn params(&self) -> &ManipulatorParams {
        if self.active {
            &self.shifted
        } else {
            &self.nominal
        }
    }

    pub fn nominal(&self) -> &ManipulatorParams {
        &self.nominal
    }

    pub fn kinetic_energy(&self, x: &DVector<f64>) -> f64 {
        let q = [x[0], x[1], x[2]];
        let qd = Vector3::new(x[3], x[4], x[5]);
        0.5 * qd.dot(&(mass_matrix(self.params(), &q) * qd))
    }
}

/// `θ̈ = M⁻¹(τ − C θ̇ − G)`; rejects configurations whose mass matrix is not
/// numerically positive definite.
pub fn manip_derivative(p: &ManipulatorParams, x: &DVector<f64>, tau: &Vector3<f64>) -> Result<DVector<f64>> {
    let q = [x[0], x[1], x[2]];
    let qd = [x[3], x[4], x[5]];
    let m = mass_matrix(p, &q);
    let eig = m.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 1e-9) || hi / lo > 1e12 {
        return Err(CoreError::SingularMassMatrix(if lo > 0.0 { hi / lo } else { f64::INFINITY }));
    }
    let c = coriolis_matrix(p, &q, &qd);
    let rhs = tau - c * Vector3::from(qd) - gravity_vector(p, &q);
    let qdd = m
        .cholesky()
        .ok_or(CoreError::SingularMassMatrix(hi / lo))?
        .solve(&rhs);
    Ok(DVector::from_row_slice(&[qd[0], qd[1], qd[2], qdd[0], qdd[1], qdd[2]]))
}

impl Plant for ManipulatorPlant {
    fn state_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        3
    }

    fn derivative(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("manipulator state", 6, x.len())?;
        check_len("manipulator input", 3, u.len())?;
        let u = self.clip_input(u);
        let scale = if self.active { 1.0 - self.resistive_fraction } else { 1.0 };
        let tau = Vector3::new(u[0], u[1], u[2]) * scale;
        manip_derivative(self.params(), x, &tau)
    }

    fn input_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let t = self.nominal.max_torque_nm;
        (DVector::from_element(3, -t), DVector::from_element(3, t))
    }

    fn stabilizing_input(&self, x: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
        let p = &self.nominal;
        let q = [x[0], x[1], x[2]];
        let m = mass_matrix(p, &q);
        let e = Vector3::new(target[0] - x[0], target[1] - x[1], target[2] - x[2]);
        let ed = Vector3::new(-x[3], -x[4], -x[5]);
        let tau = m * (e * 25.0 + ed * 10.0) + gravity_vector(p, &q);
        self.clip_input(&DVector::from_row_slice(tau.as_slice()))
    }

    fn set_shift_active(&mut self, active: bool) {
        self.active = active;
    }

    fn shift_active(&self) -> bool {
        self.active
    }
}
