//! The closed control loop.
//!
//! Per step: observe, encode, solve the MPC on the frozen estimate, apply the first
//! input, integrate the plant over one control period, observe the successor, push
//! the window, score the disturbance under the pre-update model, then adapt.

use std::time::Instant;

use koopact_core::adaptation::{AdaptationWindow, EnvelopeTracker, LiftedModelEstimate};
use koopact_core::lifting::NominalModel;
use koopact_core::linalg::{lambda_max, lambda_min};
use koopact_core::mpc::{self, model_change, shift_warm_start, terminal_weight, MpcProblem, MpcStatus};
use koopact_core::plants::{integrate_held, NoiseSource};
use koopact_core::safety::{h_value, monitor_step, planar3r_fk};
use koopact_core::tightening::{delta_analytical, TighteningState};
use nalgebra::{DMatrix, DVector};

use crate::config::{PlantConfig, ScenarioConfig};
use crate::error::{AtStep, Result};
use crate::identify::{build_plant, load_or_identify};
use crate::logs::{self, cell, RunLogs, Table};
use crate::metrics::{compute_e_dyn, rmse, settling_time, terminal_mean, RunMetrics};
use crate::reference::Reference;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: RunMetrics,
    pub logs: RunLogs,
    /// Wall-clock seconds per MPC solve; kept out of the deterministic tables.
    pub solve_times: Vec<f64>,
    pub e_dyn: Vec<f64>,
    pub gramian_floors: Vec<f64>,
}

impl RunOutput {
    /// Writes every table into `dir`. Wall-clock solve times vary between runs, so
    /// `timing.csv` is only written on request.
    pub fn write(&self, dir: &std::path::Path, with_timing: bool) -> Result<()> {
        self.logs.write_all(dir)?;
        if !with_timing {
            return Ok(());
        }
        let mut timing = Table::new(logs::TIMING_COLUMNS);
        for (k, t) in self.solve_times.iter().enumerate() {
            timing.push(vec![k.to_string(), cell(*t)]);
        }
        timing.write(&dir.join("timing.csv"))?;
        Ok(())
    }
}

fn diag(v: &[f64]) -> DMatrix<f64> {
    DMatrix::from_diagonal(&DVector::from_column_slice(v))
}

fn planar_position(plant: &PlantConfig, x: &DVector<f64>) -> [f64; 2] {
    match plant {
        PlantConfig::Quadrotor(_) => [x[0], x[1]],
        PlantConfig::Manipulator(p) => {
            let tip = planar3r_fk(&p.lengths_m, &[x[0], x[1], x[2]]);
            [tip[0], tip[1]]
        }
        PlantConfig::Linear(_) => [x[0], if x.len() > 1 { x[1] } else { 0.0 }],
    }
}

/// Identifies (or loads) the nominal model, then runs the loop.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    let nominal = load_or_identify(cfg)?;
    run_with_model(cfg, &nominal)
}

pub fn summary_table(metrics: &RunMetrics) -> Table {
    let m = metrics;
    let cols = [
        "schema_version",
        "rmse",
        "terminal_e_dyn",
        "settling_time_s",
        "collisions",
        "min_h_true",
        "decay_misses",
        "coverage_miss_rate",
        "coverage_steps",
        "gramian_floor",
        "converged_solves",
        "max_iter_solves",
        "relaxed_solves",
        "max_delta",
    ];
    let mut t = Table::new(&cols);
    t.push(vec![
        logs::SCHEMA_VERSION.to_string(),
        cell(m.rmse),
        cell(m.terminal_e_dyn),
        cell(m.settling_time_s),
        m.collisions.to_string(),
        cell(m.min_h_true),
        m.decay_misses.to_string(),
        cell(m.coverage_miss_rate),
        m.coverage_steps.to_string(),
        cell(m.gramian_floor),
        m.converged_solves.to_string(),
        m.max_iter_solves.to_string(),
        m.relaxed_solves.to_string(),
        cell(m.max_delta),
    ]);
    t
}

pub fn run_with_model(cfg: &ScenarioConfig, nominal: &NominalModel) -> Result<RunOutput> {
    let dict = nominal.dictionary.clone();
    let mut est = LiftedModelEstimate::from_nominal(nominal, 0.0);
    let mut plant = build_plant(&cfg.plant, &cfg.run.shift)?;
    let reference = Reference::new(cfg.mpc.reference.clone(), cfg.plant.clone())?;
    let (n, m, p) = (est.state_dim(), est.input_dim(), est.lifted_dim());
    let dt = cfg.run.dt_ctrl_s;
    let substeps = cfg.substeps();
    let np = cfg.mpc.horizon;
    let nd = cfg.metrics.e_dyn_horizon;
    let ad = &cfg.adaptation;

    let mut noise = NoiseSource::new(cfg.run.seed, cfg.run.noise_std)?;
    let mut window = AdaptationWindow::new(ad.window, ad.gamma, p, m)?;
    let mut tightening = TighteningState::new(n, cfg.tightening.params)?;
    let mut tracker = EnvelopeTracker::new(ad.window, ad.e0_norm, ad.nu, ad.v_max_floor);

    let (plant_lo, plant_hi) = plant.input_bounds();
    let input_lower = cfg.mpc.input_lower.as_deref().map_or(plant_lo, DVector::from_column_slice);
    let input_upper = cfg.mpc.input_upper.as_deref().map_or(plant_hi, DVector::from_column_slice);
    let x0 = match &cfg.run.initial_state {
        Some(v) => DVector::from_column_slice(v),
        None => reference.state(0.0)?,
    };
    let mut problem = MpcProblem::tracking(
        np,
        diag(&cfg.mpc.q_diag),
        diag(&cfg.mpc.r_diag),
        input_lower,
        input_upper,
        vec![DVector::zeros(n); np],
        x0.clone(),
    );
    problem.beta = cfg.mpc.beta;
    problem.beta_schedule = cfg.mpc.beta_schedule;
    problem.eps_reg = cfg.mpc.eps_reg;
    if let Some(v) = &cfg.mpc.state_lower {
        problem.state_lower = DVector::from_column_slice(v);
    }
    if let Some(v) = &cfg.mpc.state_upper {
        problem.state_upper = DVector::from_column_slice(v);
    }
    problem.barriers = cfg.mpc.barriers.clone();
    problem.cbf = cfg.mpc.cbf;
    let mut terminal_basis = est.w_hat().clone();
    if cfg.mpc.terminal_cost {
        problem.terminal_p = Some(terminal_weight(&est, &problem.q, &problem.r));
    }

    let mut mpc_t = Table::new(logs::MPC_COLUMNS);
    let mut adapt_t = Table::new(logs::ADAPTATION_COLUMNS);
    let mut tight_t = Table::new(logs::TIGHTENING_COLUMNS);
    let mut safety_t = Table::new(logs::SAFETY_COLUMNS);
    let mut track_t = Table::new(logs::TRACKING_COLUMNS);
    let mut true_t = Table::new(&logs::state_columns(n));
    let mut obs_t = Table::new(&logs::state_columns(n));
    let mut input_t = Table::new(&logs::input_columns(m));
    let state_row = |k: usize, t: f64, x: &DVector<f64>| {
        let mut row = vec![k.to_string(), cell(t)];
        row.extend(x.iter().map(|v| cell(*v)));
        row
    };

    let mut x_true = x0;
    let mut x_obs = noise.observe(&x_true);
    true_t.push(state_row(0, 0.0, &x_true));
    obs_t.push(state_row(0, 0.0, &x_obs));
    let first = plant.stabilizing_input(&x_obs, &reference.state(0.0)?);
    let mut warm = Some(DMatrix::from_fn(m, np, |i, _| first[i]));

    let mut true_hist = vec![x_true.clone()];
    let mut input_hist: Vec<DVector<f64>> = Vec::new();
    let mut tracking_errors = Vec::new();
    let mut e_dyn_series = Vec::new();
    let mut e_dyn_timed = Vec::new();
    let mut solve_times = Vec::new();
    let mut floors = Vec::new();
    let mut collisions = 0usize;
    let mut min_h_true = f64::INFINITY;
    let mut decay_misses = 0usize;
    let (mut cov_miss, mut cov_steps) = (0usize, 0usize);
    let (mut converged, mut max_iter, mut relaxed) = (0usize, 0usize, 0usize);
    let mut max_delta = 0.0f64;
    let mut expected_version = est.version();
    let hard: Vec<_> = cfg.mpc.barriers.iter().filter(|b| b.hard).cloned().collect();
    let k_warm = cfg.tightening.params.k_warm;
    let eps_ema = cfg.tightening.params.eps_ema;

    for k in 0..cfg.run.steps {
        let t = k as f64 * dt;
        plant.set_shift_active(cfg.run.shift.active_at(k));
        let z = dict.encode(&x_obs).at_step(k)?;

        let env = tracker.envelope();
        let delta_ana = delta_analytical(&env, k).unwrap_or(f64::NAN);
        let breakdown = if tightening.observations() > 0 {
            Some(tightening.breakdown(k, Some(delta_ana)).at_step(k)?)
        } else {
            None
        };
        let delta = match (&breakdown, cfg.tightening.enabled) {
            (Some(b), true) => b.implemented,
            _ => 0.0,
        };
        max_delta = max_delta.max(delta);

        problem.x_current = x_obs.clone();
        problem.step = k;
        problem.delta = delta;
        problem.reference = (1..=np).map(|i| reference.state(t + i as f64 * dt)).collect::<Result<_>>()?;
        if cfg.mpc.terminal_cost && model_change(&terminal_basis, est.w_hat()) > 0.01 {
            problem.terminal_p = Some(terminal_weight(&est, &problem.q, &problem.r));
            terminal_basis = est.w_hat().clone();
        }

        assert_eq!(est.version(), expected_version, "solve must use the latest estimate");
        let started = Instant::now();
        let sol = mpc::solve(&problem, &est, &z, &cfg.mpc.sqp, warm.as_ref()).at_step(k)?;
        solve_times.push(started.elapsed().as_secs_f64());
        match sol.status {
            MpcStatus::Converged => converged += 1,
            MpcStatus::MaxIters => max_iter += 1,
            MpcStatus::InfeasibleRelaxed => relaxed += 1,
        }
        floors.push(sol.gramian_floor);
        mpc_t.push(vec![
            k.to_string(),
            est.version().to_string(),
            cell(sol.j_task),
            cell(sol.j_info),
            cell(sol.beta),
            sol.sqp_iters.to_string(),
            sol.qp_iters.to_string(),
            cell(sol.gramian_floor),
            cell(sol.max_slack),
            sol.status.as_str().to_string(),
        ]);

        let u = plant.clip_input(&sol.first_input());
        let mut substep_collisions = 0usize;
        let x_next = integrate_held(plant.as_ref(), t, &x_true, &u, cfg.run.dt_sim_s, substeps, |_, xs| {
            let mut hit = false;
            for b in &hard {
                let h = h_value(b, xs);
                min_h_true = min_h_true.min(h);
                hit |= h < 0.0;
            }
            if hit {
                substep_collisions += 1;
            }
        })
        .at_step(k)?;
        collisions += substep_collisions;
        let report = monitor_step(&cfg.mpc.barriers, &x_next, &x_true, &cfg.mpc.cbf);
        decay_misses += report.decay_misses();
        safety_t.push(vec![
            k.to_string(),
            cell(if report.h.is_empty() { f64::NAN } else { report.min_h() }),
            report.hard_violations().to_string(),
            report.decay_misses().to_string(),
            substep_collisions.to_string(),
        ]);

        let x_obs_next = noise.observe(&x_next);
        let z_next = dict.encode(&x_obs_next).at_step(k)?;
        let mut v = DVector::zeros(p + m);
        v.rows_mut(0, p).copy_from(&z);
        v.rows_mut(p, m).copy_from(&u);
        window.push(v.clone(), z_next.clone()).at_step(k)?;

        // disturbance under the estimate the solve used
        let s = est.c() * (&z_next - est.predict(&v).at_step(k)?);
        let score = tightening.observe_disturbance(&s).at_step(k)?;
        if let Some(b) = &breakdown {
            if k >= k_warm {
                cov_steps += 1;
                if score > b.conformal - eps_ema {
                    cov_miss += 1;
                }
            }
        }
        tight_t.push(vec![
            k.to_string(),
            cell(s.norm()),
            cell(score),
            cell(breakdown.map_or(f64::NAN, |b| b.warmup)),
            cell(breakdown.map_or(f64::NAN, |b| b.conformal)),
            cell(delta),
            cell(delta_ana),
        ]);

        let g = window.gramian().at_step(k)?;
        let eta = ad.eta.resolve(&g);
        est.eta = eta;
        let e_pred = window.prediction_error_matrix(est.w_hat()).at_step(k)?.norm();
        let rho = tracker.observe(&g, eta, &v);
        if ad.enabled {
            est.adapt(&window).at_step(k)?;
        }
        expected_version = est.version();
        let env = tracker.envelope();
        adapt_t.push(vec![
            k.to_string(),
            cell(e_pred),
            cell(lambda_min(&g)),
            cell(lambda_max(&g)),
            cell(eta),
            cell(rho),
            cell(env.error_envelope(k + 1).unwrap_or(f64::NAN)),
            cell(env.composite_bound(k + 1).unwrap_or(f64::NAN)),
        ]);

        true_hist.push(x_next.clone());
        input_hist.push(u.clone());
        let t_next = t + dt;
        let e_dyn = if k + 1 >= nd {
            let e = compute_e_dyn(&est, &dict, &true_hist[k + 1 - nd..=k + 1], &input_hist[k + 1 - nd..=k])?;
            e_dyn_series.push(e);
            e_dyn_timed.push((t_next, e));
            e
        } else {
            f64::NAN
        };
        let pos = planar_position(&cfg.plant, &x_next);
        let (ref_pos, err) = match reference.position(t_next) {
            Some(r) => (r, ((pos[0] - r[0]).powi(2) + (pos[1] - r[1]).powi(2)).sqrt()),
            None => {
                let target = reference.state(t_next)?;
                (planar_position(&cfg.plant, &target), (&x_next - target).norm())
            }
        };
        tracking_errors.push(err);
        track_t.push(vec![
            (k + 1).to_string(),
            cell(t_next),
            cell(ref_pos[0]),
            cell(ref_pos[1]),
            cell(pos[0]),
            cell(pos[1]),
            cell(err),
            cell(e_dyn),
        ]);
        true_t.push(state_row(k + 1, t_next, &x_next));
        obs_t.push(state_row(k + 1, t_next, &x_obs_next));
        let mut urow = vec![k.to_string()];
        urow.extend(u.iter().map(|v| cell(*v)));
        input_t.push(urow);

        warm = Some(shift_warm_start(&sol.u));
        x_true = x_next;
        x_obs = x_obs_next;
    }

    let metrics = RunMetrics {
        rmse: rmse(&tracking_errors),
        terminal_e_dyn: terminal_mean(&e_dyn_series, cfg.metrics.terminal_window_steps),
        settling_time_s: settling_time(&e_dyn_timed, cfg.metrics.settle_window_s, cfg.metrics.settle_band),
        collisions,
        min_h_true,
        decay_misses,
        coverage_miss_rate: if cov_steps > 0 { cov_miss as f64 / cov_steps as f64 } else { f64::NAN },
        coverage_steps: cov_steps,
        gramian_floor: floors.iter().copied().fold(f64::INFINITY, f64::min),
        converged_solves: converged,
        max_iter_solves: max_iter,
        relaxed_solves: relaxed,
        max_delta,
    };
    let tables = vec![
        ("mpc.csv".to_string(), mpc_t),
        ("adaptation.csv".to_string(), adapt_t),
        ("tightening.csv".to_string(), tight_t),
        ("safety.csv".to_string(), safety_t),
        ("tracking.csv".to_string(), track_t),
        ("true_states.csv".to_string(), true_t),
        ("observed_states.csv".to_string(), obs_t),
        ("inputs.csv".to_string(), input_t),
        ("summary.csv".to_string(), summary_table(&metrics)),
    ];
    Ok(RunOutput {
        metrics,
        logs: RunLogs { tables },
        solve_times,
        e_dyn: e_dyn_series,
        gramian_floors: floors,
    })
}
