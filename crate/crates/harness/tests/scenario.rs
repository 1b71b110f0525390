use koopact::config::ScenarioConfig;
use koopact::logs::{self, Table};
use koopact::{presets, run_scenario, sweep, sweep_table, GridAxis, HarnessError};

fn regulation() -> ScenarioConfig {
    let mut cfg = presets::linear_regulation().unwrap();
    cfg.run.steps = 60;
    cfg
}

fn column_f64(t: &Table, name: &str) -> Vec<f64> {
    t.column(name).unwrap().iter().map(|c| c.parse().unwrap()).collect()
}

#[test]
fn presets_parse_and_validate() {
    for name in ["quadrotor_obstacles", "manipulator_tracking", "linear_regulation"] {
        let cfg = presets::by_name(name).unwrap();
        assert_eq!(cfg.name, name);
        cfg.validate().unwrap();
    }
    assert!(matches!(presets::by_name("nope"), Err(HarnessError::Config(_))));
}

#[test]
fn config_round_trips_through_toml() {
    for name in ["quadrotor_obstacles", "manipulator_tracking", "linear_regulation"] {
        let cfg = presets::by_name(name).unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ScenarioConfig::from_toml(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn malformed_config_is_rejected() {
    assert!(ScenarioConfig::from_toml("name = 3").is_err());
    let mut cfg = regulation();
    cfg.mpc.horizon = 0;
    assert!(cfg.validate().is_err());
}

#[test]
fn tables_carry_pinned_columns() {
    let out = run_scenario(&regulation()).unwrap();
    let expect: [(&str, &[&str]); 5] = [
        ("mpc.csv", logs::MPC_COLUMNS),
        ("adaptation.csv", logs::ADAPTATION_COLUMNS),
        ("tightening.csv", logs::TIGHTENING_COLUMNS),
        ("safety.csv", logs::SAFETY_COLUMNS),
        ("tracking.csv", logs::TRACKING_COLUMNS),
    ];
    for (name, cols) in expect {
        let t = out.logs.table(name).unwrap();
        assert_eq!(t.columns, cols, "{name}");
        assert_eq!(t.rows.len(), 60, "{name}");
    }
    assert_eq!(out.logs.table("true_states.csv").unwrap().columns, logs::state_columns(2));
    assert_eq!(out.logs.table("inputs.csv").unwrap().columns, logs::input_columns(1));
    let summary = out.logs.table("summary.csv").unwrap();
    assert_eq!(summary.column("schema_version").unwrap(), vec![logs::SCHEMA_VERSION.to_string()]);
}

#[test]
fn each_solve_uses_the_estimate_from_the_previous_step() {
    let out = run_scenario(&regulation()).unwrap();
    let mpc = out.logs.table("mpc.csv").unwrap();
    let ks = mpc.column("k").unwrap();
    let versions = mpc.column("model_version").unwrap();
    for (k, v) in ks.iter().zip(versions) {
        assert_eq!(k, &v);
    }
}

#[test]
fn frozen_model_keeps_version_zero() {
    let mut cfg = regulation();
    cfg.adaptation.enabled = false;
    let out = run_scenario(&cfg).unwrap();
    let mpc = out.logs.table("mpc.csv").unwrap();
    assert!(mpc.column("model_version").unwrap().iter().all(|v| *v == "0"));
}

#[test]
fn runs_are_reproducible() {
    let cfg = regulation();
    let a = run_scenario(&cfg).unwrap();
    let b = run_scenario(&cfg).unwrap();
    assert_eq!(a.logs, b.logs);
}

#[test]
fn noise_seed_changes_observations() {
    let mut cfg = regulation();
    cfg.run.noise_std = 1e-3;
    let a = run_scenario(&cfg).unwrap();
    cfg.run.seed += 1;
    let b = run_scenario(&cfg).unwrap();
    assert_ne!(a.logs.table("observed_states.csv"), b.logs.table("observed_states.csv"));
}

#[test]
fn plain_lq_regulation_settles() {
    let mut cfg = regulation();
    cfg.mpc.beta = 0.0;
    cfg.run.noise_std = 0.0;
    cfg.run.steps = 300;
    let out = run_scenario(&cfg).unwrap();
    let track = out.logs.table("tracking.csv").unwrap();
    let err = column_f64(track, "tracking_error");
    let tail = err[err.len() - 10..].iter().copied().fold(0.0, f64::max);
    assert!(tail < 1e-6, "tail tracking error {tail}");
    assert_eq!(out.metrics.collisions, 0);
}

#[test]
fn written_tables_read_back_identically() {
    let out = run_scenario(&regulation()).unwrap();
    let dir = std::env::temp_dir().join(format!("koopact-scenario-{}", std::process::id()));
    out.write(&dir, false).unwrap();
    assert!(!dir.join("timing.csv").exists());
    for (name, table) in &out.logs.tables {
        assert_eq!(&Table::read(&dir.join(name)).unwrap(), table, "{name}");
    }
    let plot = logs::replay(&dir, &dir.join("plot.csv")).unwrap();
    assert_eq!(plot.rows.len(), 60);
    out.write(&dir, true).unwrap();
    assert_eq!(Table::read(&dir.join("timing.csv")).unwrap().columns, logs::TIMING_COLUMNS);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn single_point_sweep_matches_direct_run() {
    let cfg = regulation();
    let axis = GridAxis::parse("mpc.beta=10.0").unwrap();
    let rows = sweep(&cfg, &[axis], 1).unwrap();
    assert_eq!(rows.len(), 1);
    let direct = run_scenario(&cfg).unwrap();
    assert_eq!(sweep_table(&rows).rows[0][1..], koopact::scenario::summary_table(&direct.metrics).rows[0][..]);
}

#[test]
fn product_grid_runs_every_point() {
    let cfg = regulation();
    let axes = [
        GridAxis::parse("mpc.beta=0.0,1.0").unwrap(),
        GridAxis::parse("run.seed=1,2").unwrap(),
    ];
    let serial = sweep(&cfg, &axes, 1).unwrap();
    let parallel = sweep(&cfg, &axes, 2).unwrap();
    assert_eq!(serial.len(), 4);
    assert_eq!(sweep_table(&serial), sweep_table(&parallel));
    let table = sweep_table(&serial);
    assert_eq!(&table.columns[..2], ["mpc.beta", "run.seed"]);
}

#[test]
fn bad_grid_axes_are_rejected() {
    assert!(GridAxis::parse("mpc.beta").is_err());
    assert!(GridAxis::parse("=1").is_err());
    assert!(sweep(&regulation(), &[], 1).is_err());
    let axis = GridAxis::parse("mpc.horizon=\"ten\"").unwrap();
    assert!(sweep(&regulation(), &[axis], 1).is_err());
}

#[test]
fn unknown_suite_is_an_error() {
    assert!(matches!(koopact::verify("no_such_suite"), Err(HarnessError::UnknownSuite(_))));
}

#[test]
fn fast_suites_pass() {
    for name in ["recursion", "logdet_gradient", "plant_physics"] {
        let reports = koopact::verify(name).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(reports[0].passed, "{}", reports[0]);
    }
}
