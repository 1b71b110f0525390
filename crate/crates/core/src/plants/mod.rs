//! Ground-truth plants integrated by fixed-step RK4, with injectable distributional
//! shift and seeded measurement noise.

pub mod linear;
pub mod manipulator;
pub mod quadrotor;

pub use linear::LinearPlant;
pub use manipulator::{ManipulatorParams, ManipulatorPlant};
pub use quadrotor::{QuadrotorParams, QuadrotorPlant};

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Continuous-time dynamics `ẋ = f(t, x, u)`.
pub trait Plant: Send + Sync {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn derivative(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>>;
    /// Actuator limits known to the controller.
    fn input_bounds(&self) -> (DVector<f64>, DVector<f64>);
    /// A simple stabilizing law toward `target` built from nominal parameters; used to
    /// collect identification data.
    fn stabilizing_input(&self, x: &DVector<f64>, target: &DVector<f64>) -> DVector<f64>;
    /// Switches the configured shift on or off.
    fn set_shift_active(&mut self, active: bool);
    fn shift_active(&self) -> bool;

    fn clip_input(&self, u: &DVector<f64>) -> DVector<f64> {
        let (lo, hi) = self.input_bounds();
        DVector::from_fn(u.len(), |i, _| u[i].clamp(lo[i], hi[i]))
    }
}

/// One classical fourth-order Runge-Kutta step.
pub fn rk4_step<F>(f: F, t: f64, x: &DVector<f64>, dt: f64) -> Result<DVector<f64>>
where
    F: Fn(f64, &DVector<f64>) -> Result<DVector<f64>>,
{
    if !(dt > 0.0) {
        return Err(CoreError::InvalidParameter("rk4 step needs dt > 0".into()));
    }
    let k1 = f(t, x)?;
    let k2 = f(t + 0.5 * dt, &(x + &k1 * (0.5 * dt)))?;
    let k3 = f(t + 0.5 * dt, &(x + &k2 * (0.5 * dt)))?;
    let k4 = f(t + dt, &(x + &k3 * dt))?;
    let next = x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    if !next.iter().all(|v| v.is_finite()) {
        return Err(CoreError::NonFinite("rk4 state"));
    }
    Ok(next)
}

/// Integrates a plant under a zero-order-held input over `substeps` RK4 steps of
/// `dt`, calling `visit` after every substep.
pub fn integrate_held<P: Plant + ?Sized>(
    plant: &P,
    t0: f64,
    x: &DVector<f64>,
    u: &DVector<f64>,
    dt: f64,
    substeps: usize,
    mut visit: impl FnMut(f64, &DVector<f64>),
) -> Result<DVector<f64>> {
    let mut state = x.clone();
    for i in 0..substeps {
        let t = t0 + i as f64 * dt;
        state = rk4_step(|tt, xx| plant.derivative(tt, xx, u), t, &state, dt)?;
        visit(t + dt, &state);
    }
    Ok(state)
}

/// Horizontal wind speed profile `v_w(t)` with a fixed direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum WindProfile {
    Constant { speed_mps: f64, angle_rad: f64 },
    Ramp { from_mps: f64, to_mps: f64, start_s: f64, end_s: f64, angle_rad: f64 },
    Sinusoidal { mean_mps: f64, amplitude_mps: f64, period_s: f64, angle_rad: f64 },
}

impl Default for WindProfile {
    fn default() -> Self {
        WindProfile::Constant { speed_mps: 0.0, angle_rad: 0.0 }
    }
}

impl WindProfile {
    /// `(speed, direction)` at time `t`.
    pub fn at(&self, t: f64) -> (f64, f64) {
        match *self {
            WindProfile::Constant { speed_mps, angle_rad } => (speed_mps, angle_rad),
            WindProfile::Ramp { from_mps, to_mps, start_s, end_s, angle_rad } => {
                let s = if end_s > start_s { ((t - start_s) / (end_s - start_s)).clamp(0.0, 1.0) } else if t >= start_s { 1.0 } else { 0.0 };
                (from_mps + s * (to_mps - from_mps), angle_rad)
            }
            WindProfile::Sinusoidal { mean_mps, amplitude_mps, period_s, angle_rad } => {
                let w = 2.0 * std::f64::consts::PI / period_s.max(1e-9);
                (mean_mps + amplitude_mps * (w * t).sin(), angle_rad)
            }
        }
    }
}

/// Deployment-time parameter change applied from `activation_step` on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShiftSpec {
    pub mass_scale: f64,
    pub wind: Option<WindProfile>,
    pub resistive_fraction: f64,
    pub activation_step: usize,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self {
            mass_scale: 1.0,
            wind: None,
            resistive_fraction: 0.0,
            activation_step: 0,
        }
    }
}

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.mass_scale > 0.0) {
            return Err(CoreError::InvalidParameter("mass_scale must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.resistive_fraction) {
            return Err(CoreError::InvalidParameter("resistive fraction outside [0, 1)".into()));
        }
        Ok(())
    }

    pub fn active_at(&self, step: usize) -> bool {
        step >= self.activation_step
    }
}

/// Seeded Gaussian measurement noise.
#[derive(Debug, Clone)]
pub struct NoiseSource {
    rng: ChaCha8Rng,
    std: f64,
}

impl NoiseSource {
    pub fn new(seed: u64, std: f64) -> Result<Self> {
        if !(std >= 0.0) {
            return Err(CoreError::InvalidParameter("noise std must be nonnegative".into()));
        }
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
            std,
        })
    }

    /// `x + N(0, std² I)`; exact when `std = 0`.
    pub fn observe(&mut self, x: &DVector<f64>) -> DVector<f64> {
        if self.std == 0.0 {
            return x.clone();
        }
        let std = self.std;
        let rng = &mut self.rng;
        x.map(|v| {
            let e: f64 = StandardNormal.sample(rng);
            v + std * e
        })
    }
}
