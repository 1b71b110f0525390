//! Scenario configuration, read from TOML. Keys carry their units where they have one.

use std::path::{Path, PathBuf};

use koopact_core::adaptation::EtaPolicy;
use koopact_core::lifting::RbfKernel;
use koopact_core::mpc::{BetaSchedule, SqpSettings};
use koopact_core::plants::manipulator::ManipulatorParams;
use koopact_core::plants::quadrotor::QuadrotorParams;
use koopact_core::plants::ShiftSpec;
use koopact_core::safety::{Barrier, CbfParams};
use koopact_core::tightening::TighteningParams;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};
use crate::reference::ReferenceConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub plant: PlantConfig,
    pub dictionary: DictionaryConfig,
    pub identification: IdentificationConfig,
    #[serde(default)]
    pub adaptation: AdaptationConfig,
    #[serde(default)]
    pub tightening: TighteningConfig,
    pub mpc: MpcConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlantConfig {
    Quadrotor(QuadrotorParams),
    Manipulator(ManipulatorParams),
    Linear(LinearPlantConfig),
}

/// Continuous-time `ẋ = A x + B u`; matrices are given row by row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearPlantConfig {
    pub a: Vec<Vec<f64>>,
    pub b: Vec<Vec<f64>>,
    pub input_lower: Vec<f64>,
    pub input_upper: Vec<f64>,
    /// Gain of the data-collection feedback `u = K (target − x)`.
    #[serde(default)]
    pub feedback: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DictionaryConfig {
    Polynomial {
        degree: usize,
        #[serde(default)]
        constant: bool,
    },
    /// RBF centers drawn by Latin hypercube in the box, seeded from the identification seed.
    Rbf {
        count: usize,
        kernel: RbfKernel,
        lower: Vec<f64>,
        upper: Vec<f64>,
        #[serde(default)]
        constant: bool,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IdentificationConfig {
    pub trajectories: usize,
    pub length_steps: usize,
    /// Excitation standard deviation as a fraction of the input half-range.
    pub excitation: f64,
    /// AR(1) coefficient of the filtered excitation.
    pub filter: f64,
    /// Operating point and half-widths for initial states and feedback targets.
    pub center: Vec<f64>,
    pub spread: Vec<f64>,
    pub target_hold_steps: usize,
    pub ridge: f64,
    pub seed: u64,
    /// Load a saved model instead of identifying one.
    pub model_path: Option<PathBuf>,
}

impl Default for IdentificationConfig {
    fn default() -> Self {
        Self {
            trajectories: 20,
            length_steps: 200,
            excitation: 0.2,
            filter: 0.9,
            center: Vec::new(),
            spread: Vec::new(),
            target_hold_steps: 50,
            ridge: 1e-8,
            seed: 0,
            model_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdaptationConfig {
    pub enabled: bool,
    pub window: usize,
    pub gamma: f64,
    pub eta: EtaPolicy,
    /// Drift bound used for the logged error envelope.
    pub nu: f64,
    /// Initial error norm used for the logged envelope.
    pub e0_norm: f64,
    pub v_max_floor: f64,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            window: 10,
            gamma: 1.0,
            eta: EtaPolicy::default(),
            nu: 0.0,
            e0_norm: 1.0,
            v_max_floor: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TighteningConfig {
    #[serde(default = "yes")]
    pub enabled: bool,
    #[serde(flatten)]
    pub params: TighteningParams,
}

fn yes() -> bool {
    true
}

impl Default for TighteningConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            params: TighteningParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcConfig {
    pub horizon: usize,
    pub q_diag: Vec<f64>,
    pub r_diag: Vec<f64>,
    #[serde(default)]
    pub beta: f64,
    #[serde(default)]
    pub beta_schedule: BetaSchedule,
    #[serde(default = "default_eps_reg")]
    pub eps_reg: f64,
    /// Defaults to the plant's actuator limits.
    #[serde(default)]
    pub input_lower: Option<Vec<f64>>,
    #[serde(default)]
    pub input_upper: Option<Vec<f64>>,
    #[serde(default)]
    pub state_lower: Option<Vec<f64>>,
    #[serde(default)]
    pub state_upper: Option<Vec<f64>>,
    #[serde(default)]
    pub terminal_cost: bool,
    #[serde(default)]
    pub barriers: Vec<Barrier>,
    #[serde(default)]
    pub cbf: CbfParams,
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub sqp: SqpSettings,
}

fn default_eps_reg() -> f64 {
    1e-3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub steps: usize,
    pub dt_ctrl_s: f64,
    pub dt_sim_s: f64,
    #[serde(default)]
    pub noise_std: f64,
    pub seed: u64,
    /// Defaults to the reference state at time zero.
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
    #[serde(default)]
    pub shift: ShiftSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub e_dyn_horizon: usize,
    pub terminal_window_steps: usize,
    pub settle_window_s: f64,
    pub settle_band: f64,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            e_dyn_horizon: 15,
            terminal_window_steps: 50,
            settle_window_s: 0.5,
            settle_band: 0.1,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn state_dim(&self) -> usize {
        match &self.plant {
            PlantConfig::Quadrotor(_) | PlantConfig::Manipulator(_) => 6,
            PlantConfig::Linear(l) => l.a.len(),
        }
    }

    pub fn input_dim(&self) -> usize {
        match &self.plant {
            PlantConfig::Quadrotor(_) => 2,
            PlantConfig::Manipulator(_) => 3,
            PlantConfig::Linear(l) => l.b.first().map_or(0, |r| r.len()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let (n, m) = (self.state_dim(), self.input_dim());
        if n == 0 || m == 0 {
            return bad("plant needs at least one state and one input".into());
        }
        if let PlantConfig::Linear(l) = &self.plant {
            if l.a.iter().any(|r| r.len() != n) || l.b.len() != n || l.b.iter().any(|r| r.len() != m) {
                return bad("linear plant matrices are not n×n and n×m".into());
            }
        }
        if self.mpc.horizon == 0 {
            return bad("mpc horizon must be positive".into());
        }
        if self.mpc.q_diag.len() != n || self.mpc.r_diag.len() != m {
            return bad(format!("q_diag needs {n} entries and r_diag {m}"));
        }
        for (name, v, len) in [
            ("mpc.input_lower", &self.mpc.input_lower, m),
            ("mpc.input_upper", &self.mpc.input_upper, m),
            ("mpc.state_lower", &self.mpc.state_lower, n),
            ("mpc.state_upper", &self.mpc.state_upper, n),
            ("run.initial_state", &self.run.initial_state, n),
        ] {
            if let Some(v) = v {
                if v.len() != len {
                    return bad(format!("{name} needs {len} entries, got {}", v.len()));
                }
            }
        }
        let id = &self.identification;
        if id.model_path.is_none() {
            if id.center.len() != n || id.spread.len() != n {
                return bad(format!("identification center and spread need {n} entries"));
            }
            if id.trajectories == 0 || id.length_steps == 0 || id.target_hold_steps == 0 {
                return bad("identification needs trajectories, length and hold steps".into());
            }
            if !(0.0..1.0).contains(&id.filter) {
                return bad("identification filter outside [0, 1)".into());
            }
        }
        if self.run.steps == 0 || !(self.run.dt_ctrl_s > 0.0) || !(self.run.dt_sim_s > 0.0) {
            return bad("run needs positive steps and time steps".into());
        }
        if self.run.dt_sim_s > self.run.dt_ctrl_s {
            return bad("dt_sim_s exceeds dt_ctrl_s".into());
        }
        if self.adaptation.window == 0 || !(self.adaptation.gamma > 0.0 && self.adaptation.gamma <= 1.0) {
            return bad("adaptation window must be positive and gamma in (0, 1]".into());
        }
        if self.metrics.e_dyn_horizon == 0 || self.metrics.terminal_window_steps == 0 {
            return bad("metric windows must be positive".into());
        }
        self.tightening.params.validate()?;
        self.mpc.cbf.validate()?;
        self.mpc.sqp.validate()?;
        self.run.shift.validate()?;
        self.mpc.reference.validate(&self.plant)?;
        Ok(())
    }

    /// Number of integrator substeps per control period.
    pub fn substeps(&self) -> usize {
        (self.run.dt_ctrl_s / self.run.dt_sim_s).round().max(1.0) as usize
    }
}
