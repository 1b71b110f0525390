use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{Plant, ShiftSpec, WindProfile};
use crate::error::{check_len, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadrotorParams {
    pub mass_kg: f64,
    pub inertia_kgm2: f64,
    pub arm_m: f64,
    pub gravity_mps2: f64,
    /// Wind drag coefficient in kg/m.
    pub drag_kg_per_m: f64,
    pub wind: WindProfile,
    /// Per-rotor thrust limit in newtons; defaults to `2 m g`.
    pub max_thrust_n: Option<f64>,
}

impl Default for QuadrotorParams {
    fn default() -> Self {
        Self {
            mass_kg: 2.0,
            inertia_kgm2: 1.0,
            arm_m: 0.2,
            gravity_mps2: 9.81,
            drag_kg_per_m: 0.1,
            wind: WindProfile::default(),
            max_thrust_n: None,
        }
    }
}

/// Planar quadrotor with state `(y, z, θ, ẏ, ż, θ̇)` and inputs `(T1, T2)`.
#[derive(Debug, Clone)]
pub struct QuadrotorPlant {
    nominal: QuadrotorParams,
    shifted: QuadrotorParams,
    active: bool,
}

impl QuadrotorPlant {
    pub fn new(nominal: QuadrotorParams, shift: &ShiftSpec) -> Result<Self> {
        shift.validate()?;
        let mut shifted = nominal;
        shifted.mass_kg *= shift.mass_scale;
        if let Some(w) = shift.wind {
            shifted.wind = w;
        }
        Ok(Self {
            nominal,
            shifted,
            active: false,
        })
    }

    pub fn params(&self) -> &QuadrotorParams {
        if self.active {
            &self.shifted
        } else {
            &self.nominal
        }
    }

    pub fn nominal(&self) -> &QuadrotorParams {
        &self.nominal
    }

    /// Per-rotor hover thrust for the nominal mass.
    pub fn hover_thrust(&self) -> f64 {
        0.5 * self.nominal.mass_kg * self.nominal.gravity_mps2
    }
}

/// Right-hand side of the planar quadrotor dynamics.
pub fn quad_derivative(p: &QuadrotorParams, t: f64, x: &DVector<f64>, thrust: (f64, f64)) -> DVector<f64> {
    let (t1, t2) = thrust;
    let theta = x[2];
    let (v_w, a_w) = p.wind.at(t);
    let f = p.drag_kg_per_m * v_w * v_w;
    let (fy, fz) = (f * a_w.cos(), f * a_w.sin());
    let total = t1 + t2;
    DVector::from_row_slice(&[
        x[3],
        x[4],
        x[5],
        -total * theta.sin() / p.mass_kg + fy / p.mass_kg,
        total * theta.cos() / p.mass_kg - p.gravity_mps2 + fz / p.mass_kg,
        p.arm_m * (t2 - t1) / p.inertia_kgm2,
    ])
}

impl Plant for QuadrotorPlant {
    fn state_dim(&self) -> usize {
        6
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn derivative(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("quadrotor state", 6, x.len())?;
        check_len("quadrotor input", 2, u.len())?;
        let u = self.clip_input(u);
        Ok(quad_derivative(self.params(), t, x, (u[0], u[1])))
    }

    fn input_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let max = self
            .nominal
            .max_thrust_n
            .unwrap_or(2.0 * self.nominal.mass_kg * self.nominal.gravity_mps2);
        (DVector::zeros(2), DVector::from_element(2, max))
    }

    fn stabilizing_input(&self, x: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
        let p = &self.nominal;
        // outer loop: desired accelerations; inner loop: attitude tracking
        let ay = 2.0 * (target[0] - x[0]) - 2.5 * x[3];
        let az = 3.0 * (target[1] - x[1]) - 3.0 * x[4];
        let total = p.mass_kg * (p.gravity_mps2 + az);
        let theta_des = (-ay / p.gravity_mps2).clamp(-0.5, 0.5);
        let torque = p.inertia_kgm2 * (20.0 * (theta_des - x[2]) - 8.0 * x[5]);
        let diff = torque / p.arm_m;
        self.clip_input(&DVector::from_row_slice(&[0.5 * (total - diff), 0.5 * (total + diff)]))
    }

    fn set_shift_active(&mut self, active: bool) {
        self.active = active;
    }

    fn shift_active(&self) -> bool {
        self.active
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::plants::{integrate_held, rk4_step};

    #[test]
    fn hover_is_exact_equilibrium() {
        let plant = QuadrotorPlant::new(QuadrotorParams::default(), &ShiftSpec::default()).unwrap();
        let x = DVector::from_row_slice(&[0.3, 1.0, 0.0, 0.0, 0.0, 0.0]);
        let h = plant.hover_thrust();
        let u = DVector::from_row_slice(&[h, h]);
        let dx = plant.derivative(0.0, &x, &u).unwrap();
        assert!(dx.amax() <= 1e-12);
        let next = rk4_step(|t, s| plant.derivative(t, s, &u), 0.0, &x, 1e-3).unwrap();
        assert!((next - x).amax() <= 1e-12);
    }

    #[test]
    fn free_fall() {
        let plant = QuadrotorPlant::new(QuadrotorParams::default(), &ShiftSpec::default()).unwrap();
        let dx = plant.derivative(0.0, &DVector::zeros(6), &DVector::zeros(2)).unwrap();
        assert_eq!((dx[3], dx[4], dx[5]), (0.0, -9.81, 0.0));
    }

    #[test]
    fn wind_force_per_unit_mass() {
        let params = QuadrotorParams {
            wind: WindProfile::Constant { speed_mps: 3.0, angle_rad: 0.0 },
            ..Default::default()
        };
        let dx = quad_derivative(&params, 0.0, &DVector::zeros(6), (0.0, 0.0));
        // 0.1 · 9 / 2
        assert!((dx[3] - 0.45).abs() < 1e-15);
    }

    #[test]
    fn shift_changes_dynamics_only_when_active() {
        let shift = ShiftSpec {
            mass_scale: 1.6,
            wind: Some(WindProfile::Constant { speed_mps: 5.0, angle_rad: 0.0 }),
            activation_step: 3,
            ..Default::default()
        };
        let mut plant = QuadrotorPlant::new(QuadrotorParams::default(), &shift).unwrap();
        let x = DVector::zeros(6);
        let h = plant.hover_thrust();
        let u = DVector::from_row_slice(&[h, h]);
        let mut seen = Vec::new();
        for step in 0..6 {
            plant.set_shift_active(shift.active_at(step));
            seen.push(plant.derivative(0.0, &x, &u).unwrap());
        }
        let changes = seen.windows(2).filter(|w| w[0] != w[1]).count();
        assert_eq!(changes, 1);
        assert_eq!(seen[2], seen[0]);
        assert!(seen[3][4] < 0.0);
    }

    #[test]
    fn stabilizing_law_settles_near_target() {
        let plant = QuadrotorPlant::new(QuadrotorParams::default(), &ShiftSpec::default()).unwrap();
        let mut x = DVector::from_row_slice(&[0.5, -0.4, 0.1, 0.0, 0.0, 0.0]);
        let target = DVector::from_row_slice(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        for k in 0..1500 {
            let u = plant.stabilizing_input(&x, &target);
            x = integrate_held(&plant, k as f64 * 0.01, &x, &u, 1e-3, 10, |_, _| {}).unwrap();
        }
        assert!(x.amax() < 1e-2, "{x}");
    }
}
