//! Closed-loop scenario runner, parameter sweeps and acceptance suites for the
//! adaptive Koopman MPC stack in `koopact-core`.

pub mod config;
pub mod error;
pub mod identify;
pub mod logs;
pub mod metrics;
pub mod presets;
pub mod reference;
pub mod scenario;
pub mod sweep;
pub mod verify;

pub use config::ScenarioConfig;
pub use error::{HarnessError, Result};
pub use metrics::RunMetrics;
pub use scenario::{run_scenario, run_with_model, RunOutput};
pub use sweep::{sweep, sweep_table, GridAxis, SweepRow};
pub use verify::{verify, CriterionReport};
