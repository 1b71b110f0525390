//! Reference generators: planar Cartesian paths mapped to full plant states.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::config::PlantConfig;
use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferencePath {
    /// Constant full-state target.
    Setpoint { state: Vec<f64> },
    Circle { center: [f64; 2], radius_m: f64, period_s: f64 },
    Hypotrochoid {
        center: [f64; 2],
        fixed_radius_m: f64,
        rolling_radius_m: f64,
        pen_offset_m: f64,
        period_s: f64,
    },
    /// Figure-eight `(a sin ωt, a sin ωt cos ωt)`.
    Lemniscate { center: [f64; 2], half_width_m: f64, period_s: f64 },
    /// Rose curve `a cos(kωt) (cos ωt, sin ωt)`.
    Petal { center: [f64; 2], radius_m: f64, petals: u32, period_s: f64 },
    /// Side view of a climbing helix: horizontal oscillation with steady climb.
    HelixProjection { center: [f64; 2], radius_m: f64, period_s: f64, climb_mps: f64 },
    /// Piecewise-linear path through the waypoints at constant speed, holding the last one.
    Corridor { waypoints: Vec<[f64; 2]>, speed_mps: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceConfig {
    #[serde(flatten)]
    pub path: ReferencePath,
    /// End-effector orientation for the arm's inverse kinematics.
    #[serde(default)]
    pub ee_angle_rad: f64,
    #[serde(default = "elbow_default")]
    pub elbow_up: bool,
}

fn elbow_default() -> bool {
    true
}

impl ReferencePath {
    /// Planar position at time `t`; `None` for a setpoint.
    pub fn position(&self, t: f64) -> Option<[f64; 2]> {
        let w = |period: f64| 2.0 * PI / period;
        let at = |c: &[f64; 2], x: f64, y: f64| Some([c[0] + x, c[1] + y]);
        match self {
            ReferencePath::Setpoint { .. } => None,
            ReferencePath::Circle { center, radius_m, period_s } => {
                let a = w(*period_s) * t;
                at(center, radius_m * a.cos(), radius_m * a.sin())
            }
            ReferencePath::Hypotrochoid {
                center,
                fixed_radius_m: big,
                rolling_radius_m: small,
                pen_offset_m: d,
                period_s,
            } => {
                let a = w(*period_s) * t;
                let k = (big - small) / small;
                at(
                    center,
                    (big - small) * a.cos() + d * (k * a).cos(),
                    (big - small) * a.sin() - d * (k * a).sin(),
                )
            }
            ReferencePath::Lemniscate { center, half_width_m, period_s } => {
                let a = w(*period_s) * t;
                at(center, half_width_m * a.sin(), half_width_m * a.sin() * a.cos())
            }
            ReferencePath::Petal { center, radius_m, petals, period_s } => {
                let a = w(*period_s) * t;
                let r = radius_m * (*petals as f64 * a).cos();
                at(center, r * a.cos(), r * a.sin())
            }
            ReferencePath::HelixProjection { center, radius_m, period_s, climb_mps } => {
                let a = w(*period_s) * t;
                at(center, radius_m * a.sin(), climb_mps * t)
            }
            ReferencePath::Corridor { waypoints, speed_mps } => {
                let mut remaining = speed_mps * t.max(0.0);
                for seg in waypoints.windows(2) {
                    let (dx, dy) = (seg[1][0] - seg[0][0], seg[1][1] - seg[0][1]);
                    let len = (dx * dx + dy * dy).sqrt();
                    if remaining <= len && len > 0.0 {
                        let s = remaining / len;
                        return Some([seg[0][0] + s * dx, seg[0][1] + s * dy]);
                    }
                    remaining -= len;
                }
                waypoints.last().copied()
            }
        }
    }

    /// Planar velocity by central differences of the position.
    pub fn velocity(&self, t: f64) -> Option<[f64; 2]> {
        let h = 1e-6;
        let (a, b) = (self.position(t + h)?, self.position(t - h)?);
        Some([(a[0] - b[0]) / (2.0 * h), (a[1] - b[1]) / (2.0 * h)])
    }
}

/// Closed-form inverse kinematics of a planar three-link arm for the tip at `p`
/// with absolute tip orientation `phi`.
pub fn planar3r_ik(lengths: &[f64; 3], p: [f64; 2], phi: f64, elbow_up: bool) -> Option<[f64; 3]> {
    let wx = p[0] - lengths[2] * phi.cos();
    let wy = p[1] - lengths[2] * phi.sin();
    let (l1, l2) = (lengths[0], lengths[1]);
    let c2 = (wx * wx + wy * wy - l1 * l1 - l2 * l2) / (2.0 * l1 * l2);
    if !(-1.0..=1.0).contains(&c2) {
        return None;
    }
    let s2 = (1.0 - c2 * c2).sqrt() * if elbow_up { 1.0 } else { -1.0 };
    let q2 = s2.atan2(c2);
    let q1 = wy.atan2(wx) - (l2 * s2).atan2(l1 + l2 * c2);
    Some([q1, q2, phi - q1 - q2])
}

/// Jacobian of (tip x, tip y, tip angle) with respect to the joint angles.
fn planar3r_full_jacobian(lengths: &[f64; 3], q: &[f64; 3]) -> Matrix3<f64> {
    let a = [q[0], q[0] + q[1], q[0] + q[1] + q[2]];
    let mut j = Matrix3::zeros();
    for i in 0..3 {
        for k in i..3 {
            j[(0, i)] -= lengths[k] * a[k].sin();
            j[(1, i)] += lengths[k] * a[k].cos();
        }
        j[(2, i)] = 1.0;
    }
    j
}

/// Full-state reference generator bound to a plant.
#[derive(Debug, Clone)]
pub struct Reference {
    config: ReferenceConfig,
    plant: PlantConfig,
}

impl ReferenceConfig {
    pub fn validate(&self, plant: &PlantConfig) -> Result<()> {
        let n = match plant {
            PlantConfig::Linear(l) => l.a.len(),
            _ => 6,
        };
        match (&self.path, plant) {
            (ReferencePath::Setpoint { state }, _) if state.len() != n => Err(HarnessError::Config(format!(
                "setpoint needs {n} entries, got {}",
                state.len()
            ))),
            (ReferencePath::Setpoint { .. }, _) => Ok(()),
            (_, PlantConfig::Linear(_)) => Err(HarnessError::Config(
                "the linear plant only supports setpoint references".into(),
            )),
            (ReferencePath::Corridor { waypoints, speed_mps }, _) if waypoints.is_empty() || !(*speed_mps > 0.0) => {
                Err(HarnessError::Config("corridor needs waypoints and a positive speed".into()))
            }
            (ReferencePath::Corridor { .. }, _) => Ok(()),
            (path, _) => {
                let period = match path {
                    ReferencePath::Circle { period_s, .. }
                    | ReferencePath::Hypotrochoid { period_s, .. }
                    | ReferencePath::Lemniscate { period_s, .. }
                    | ReferencePath::Petal { period_s, .. }
                    | ReferencePath::HelixProjection { period_s, .. } => *period_s,
                    _ => 1.0,
                };
                if period > 0.0 {
                    Ok(())
                } else {
                    Err(HarnessError::Config("reference period must be positive".into()))
                }
            }
        }
    }
}

impl Reference {
    pub fn new(config: ReferenceConfig, plant: PlantConfig) -> Result<Self> {
        config.validate(&plant)?;
        Ok(Self { config, plant })
    }

    /// Planar target position at time `t`, if the path has one.
    pub fn position(&self, t: f64) -> Option<[f64; 2]> {
        self.config.path.position(t)
    }

    /// Full physical state target at time `t`.
    pub fn state(&self, t: f64) -> Result<DVector<f64>> {
        if let ReferencePath::Setpoint { state } = &self.config.path {
            return Ok(DVector::from_column_slice(state));
        }
        let p = self.config.path.position(t).expect("path has a position");
        let v = self.config.path.velocity(t).expect("path has a velocity");
        match &self.plant {
            PlantConfig::Quadrotor(_) => Ok(DVector::from_row_slice(&[p[0], p[1], 0.0, v[0], v[1], 0.0])),
            PlantConfig::Manipulator(params) => {
                let phi = self.config.ee_angle_rad;
                let q = planar3r_ik(&params.lengths_m, p, phi, self.config.elbow_up).ok_or_else(|| {
                    HarnessError::Config(format!("reference point ({:.3}, {:.3}) is out of reach", p[0], p[1]))
                })?;
                let j = planar3r_full_jacobian(&params.lengths_m, &q);
                let qd = j
                    .lu()
                    .solve(&Vector3::new(v[0], v[1], 0.0))
                    .ok_or_else(|| HarnessError::Config("reference passes through a singular arm pose".into()))?;
                Ok(DVector::from_row_slice(&[q[0], q[1], q[2], qd[0], qd[1], qd[2]]))
            }
            PlantConfig::Linear(_) => unreachable!("validated"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use koopact_core::plants::manipulator::ManipulatorParams;
    use koopact_core::safety::planar3r_fk;

    #[test]
    fn ik_inverts_forward_kinematics() {
        let lengths = [1.0, 0.8, 0.5];
        for (p, phi) in [([1.2, 0.7], 0.3), ([0.4, 1.5], 1.2), ([-0.9, 0.6], 2.0)] {
            let q = planar3r_ik(&lengths, p, phi, true).unwrap();
            let tip = planar3r_fk(&lengths, &q);
            assert!((tip[0] - p[0]).abs() < 1e-12 && (tip[1] - p[1]).abs() < 1e-12);
            assert!((q.iter().sum::<f64>() - phi).abs() < 1e-12);
        }
        assert!(planar3r_ik(&lengths, [5.0, 0.0], 0.0, true).is_none());
    }

    #[test]
    fn arm_reference_velocity_matches_path() {
        let cfg = ReferenceConfig {
            path: ReferencePath::Circle { center: [1.5, 0.5], radius_m: 0.3, period_s: 4.0 },
            ee_angle_rad: 0.0,
            elbow_up: true,
        };
        let params = ManipulatorParams::default();
        let r = Reference::new(cfg, PlantConfig::Manipulator(params)).unwrap();
        let (t, h) = (0.7, 1e-5);
        let x = r.state(t).unwrap();
        let fd = (r.state(t + h).unwrap() - r.state(t - h).unwrap()) / (2.0 * h);
        for i in 0..3 {
            assert!((x[3 + i] - fd[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn paths_start_where_expected() {
        let c = [0.5, -0.5];
        let circle = ReferencePath::Circle { center: c, radius_m: 1.0, period_s: 2.0 };
        assert_eq!(circle.position(0.0), Some([1.5, -0.5]));
        let hypo = ReferencePath::Hypotrochoid {
            center: [0.0, 0.0],
            fixed_radius_m: 5.0,
            rolling_radius_m: 3.0,
            pen_offset_m: 5.0,
            period_s: 1.0,
        };
        assert_eq!(hypo.position(0.0), Some([7.0, 0.0]));
        let lem = ReferencePath::Lemniscate { center: c, half_width_m: 1.0, period_s: 3.0 };
        assert_eq!(lem.position(0.0), Some(c));
        let corridor = ReferencePath::Corridor { waypoints: vec![[0.0, 0.0], [3.0, 4.0]], speed_mps: 1.0 };
        assert_eq!(corridor.position(2.5), Some([1.5, 2.0]));
        assert_eq!(corridor.position(100.0), Some([3.0, 4.0]));
    }
}
