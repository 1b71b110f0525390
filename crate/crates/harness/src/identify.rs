//! Plant construction and offline identification of the nominal lifted model.

use koopact_core::lifting::{identify_nominal, NominalModel, ObservableDictionary, TrainingBatch};
use koopact_core::plants::linear::LinearPlant;
use koopact_core::plants::manipulator::ManipulatorPlant;
use koopact_core::plants::quadrotor::QuadrotorPlant;
use koopact_core::plants::{integrate_held, Plant, ShiftSpec};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::config::{DictionaryConfig, PlantConfig, ScenarioConfig};
use crate::error::{AtStep, HarnessError, Result};

fn rows(m: &[Vec<f64>]) -> DMatrix<f64> {
    let r = m.len();
    let c = m.first().map_or(0, |v| v.len());
    DMatrix::from_fn(r, c, |i, j| m[i][j])
}

/// Builds the true plant with the run's shift settings (inactive until switched on).
pub fn build_plant(plant: &PlantConfig, shift: &ShiftSpec) -> Result<Box<dyn Plant>> {
    Ok(match plant {
        PlantConfig::Quadrotor(p) => Box::new(QuadrotorPlant::new(*p, shift)?),
        PlantConfig::Manipulator(p) => Box::new(ManipulatorPlant::new(*p, shift)?),
        PlantConfig::Linear(l) => {
            shift.validate()?;
            let mut plant = LinearPlant::new(
                rows(&l.a),
                rows(&l.b),
                DVector::from_column_slice(&l.input_lower),
                DVector::from_column_slice(&l.input_upper),
            )?
            // uniform mass scaling acts as an input gain of 1/scale
            .with_gain_shift(1.0 / shift.mass_scale);
            if let Some(k) = &l.feedback {
                plant = plant.with_feedback(rows(k));
            }
            Box::new(plant)
        }
    })
}

pub fn build_dictionary(cfg: &ScenarioConfig) -> Result<ObservableDictionary> {
    let n = cfg.state_dim();
    Ok(match &cfg.dictionary {
        DictionaryConfig::Polynomial { degree, constant } => {
            ObservableDictionary::polynomial(n, *degree)?.with_constant(*constant)
        }
        DictionaryConfig::Rbf { count, kernel, lower, upper, constant } => {
            if lower.len() != n || upper.len() != n {
                return Err(HarnessError::Config(format!("rbf box needs {n} entries")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.identification.seed ^ 0x5eed_d1c7);
            ObservableDictionary::rbf_latin_hypercube(lower, upper, *count, *kernel, &mut rng)?
                .with_constant(*constant)
        }
    })
}

fn sample_box(rng: &mut ChaCha8Rng, center: &[f64], spread: &[f64]) -> DVector<f64> {
    DVector::from_fn(center.len(), |i, _| center[i] + spread[i] * (2.0 * rng.random::<f64>() - 1.0))
}

/// Closed-loop data from the nominal plant: stabilizing feedback toward random
/// targets plus AR(1)-filtered Gaussian excitation.
pub fn collect_training(cfg: &ScenarioConfig) -> Result<TrainingBatch> {
    let id = &cfg.identification;
    let plant = build_plant(&cfg.plant, &ShiftSpec::default())?;
    let (n, m) = (plant.state_dim(), plant.input_dim());
    let (lo, hi) = plant.input_bounds();
    let half = (&hi - &lo) * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(id.seed);
    let total = id.trajectories * id.length_steps;
    let mut xs = DMatrix::zeros(n, total);
    let mut ys = DMatrix::zeros(n, total);
    let mut us = DMatrix::zeros(m, total);
    let innovation = (1.0 - id.filter * id.filter).sqrt();
    let mut col = 0;
    for _ in 0..id.trajectories {
        let mut x = sample_box(&mut rng, &id.center, &id.spread);
        let mut target = sample_box(&mut rng, &id.center, &id.spread);
        let mut e = DVector::<f64>::zeros(m);
        for k in 0..id.length_steps {
            if k > 0 && k % id.target_hold_steps == 0 {
                target = sample_box(&mut rng, &id.center, &id.spread);
            }
            for j in 0..m {
                let w: f64 = rng.sample(StandardNormal);
                e[j] = id.filter * e[j] + innovation * w * id.excitation * half[j];
            }
            let u = plant.clip_input(&(plant.stabilizing_input(&x, &target) + &e));
            let t = k as f64 * cfg.run.dt_ctrl_s;
            let next = integrate_held(plant.as_ref(), t, &x, &u, cfg.run.dt_sim_s, cfg.substeps(), |_, _| {})
                .at_step(k)?;
            xs.set_column(col, &x);
            ys.set_column(col, &next);
            us.set_column(col, &u);
            col += 1;
            x = next;
        }
    }
    Ok(TrainingBatch::new(xs, ys, us)?)
}

pub fn identify(cfg: &ScenarioConfig) -> Result<NominalModel> {
    let dict = build_dictionary(cfg)?;
    let batch = collect_training(cfg)?;
    Ok(identify_nominal(&batch, &dict, cfg.identification.ridge)?)
}

/// Loads the model named in the config, or identifies one from fresh data.
pub fn load_or_identify(cfg: &ScenarioConfig) -> Result<NominalModel> {
    match &cfg.identification.model_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            let model = NominalModel::from_text(&text)?;
            if model.state_dim() != cfg.state_dim() || model.input_dim() != cfg.input_dim() {
                return Err(HarnessError::Config(format!(
                    "model file {} does not match the plant dimensions",
                    path.display()
                )));
            }
            Ok(model)
        }
        None => identify(cfg),
    }
}
