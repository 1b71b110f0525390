//! Bundled scenario configurations, also shipped as files under `configs/`.

use crate::config::ScenarioConfig;
use crate::error::{HarnessError, Result};

pub const QUADROTOR_OBSTACLES: &str = include_str!("../configs/quadrotor_obstacles.toml");
pub const MANIPULATOR_TRACKING: &str = include_str!("../configs/manipulator_tracking.toml");
pub const LINEAR_REGULATION: &str = include_str!("../configs/linear_regulation.toml");

pub fn quadrotor_obstacles() -> Result<ScenarioConfig> {
    ScenarioConfig::from_toml(QUADROTOR_OBSTACLES)
}

pub fn manipulator_tracking() -> Result<ScenarioConfig> {
    ScenarioConfig::from_toml(MANIPULATOR_TRACKING)
}

pub fn linear_regulation() -> Result<ScenarioConfig> {
    ScenarioConfig::from_toml(LINEAR_REGULATION)
}

pub fn by_name(name: &str) -> Result<ScenarioConfig> {
    match name {
        "quadrotor_obstacles" => quadrotor_obstacles(),
        "manipulator_tracking" => manipulator_tracking(),
        "linear_regulation" => linear_regulation(),
        other => Err(HarnessError::Config(format!("no bundled scenario named `{other}`"))),
    }
}
