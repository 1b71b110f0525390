//! Run metrics: tracking RMSE, dynamic prediction error, settling time.

use koopact_core::adaptation::LiftedModelEstimate;
use koopact_core::lifting::ObservableDictionary;
use nalgebra::DVector;
use serde::Serialize;

use crate::error::{HarnessError, Result};

/// Summary of one closed-loop run. Every field is a deterministic function of the config.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    pub rmse: f64,
    pub terminal_e_dyn: f64,
    /// `NaN` when the series never settles or is empty.
    pub settling_time_s: f64,
    /// Simulation substeps at which some hard barrier had `h(x_true) < 0`.
    pub collisions: usize,
    pub min_h_true: f64,
    pub decay_misses: usize,
    pub coverage_miss_rate: f64,
    pub coverage_steps: usize,
    /// Smallest `λ_min(V̂V̂ᵀ)` of the planned regressors over the run.
    pub gramian_floor: f64,
    pub converged_solves: usize,
    pub max_iter_solves: usize,
    pub relaxed_solves: usize,
    pub max_delta: f64,
}

/// RMSE of the `N_d`-step open-loop prediction of `model` from `states[0]` under
/// `inputs`, against `states[1..=N_d]` in physical coordinates.
pub fn compute_e_dyn(
    model: &LiftedModelEstimate,
    dictionary: &ObservableDictionary,
    states: &[DVector<f64>],
    inputs: &[DVector<f64>],
) -> Result<f64> {
    let nd = inputs.len();
    if nd == 0 || states.len() < nd + 1 {
        return Err(HarnessError::Config(format!(
            "e_dyn needs {} states for {nd} inputs, got {}",
            nd + 1,
            states.len()
        )));
    }
    let a = model.a();
    let b = model.b();
    let mut z = dictionary.encode(&states[0])?;
    let mut acc = 0.0;
    for j in 0..nd {
        z = &a * &z + &b * &inputs[j];
        acc += (model.c() * &z - &states[j + 1]).norm_squared();
    }
    Ok((acc / nd as f64).sqrt())
}

pub fn rmse(errors: &[f64]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt()
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// First time after which `series` stays within `band` (relative) of its steady value,
/// the median over the trailing `window_s` seconds. Times are `(t, value)` pairs.
pub fn settling_time(series: &[(f64, f64)], window_s: f64, band: f64) -> f64 {
    let Some(&(t_end, _)) = series.last() else {
        return f64::NAN;
    };
    let mut tail: Vec<f64> = series.iter().filter(|(t, _)| *t >= t_end - window_s).map(|(_, v)| *v).collect();
    let steady = median(&mut tail);
    let tol = band * steady.abs();
    let mut settled_from = None;
    for (i, (_, v)) in series.iter().enumerate().rev() {
        if (v - steady).abs() <= tol {
            settled_from = Some(i);
        } else {
            break;
        }
    }
    match settled_from {
        Some(i) => series[i].0 - series[0].0,
        None => f64::NAN,
    }
}

/// Mean of the last `window` entries.
pub fn terminal_mean(values: &[f64], window: usize) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let tail = &values[values.len().saturating_sub(window)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    fn identity_model(a: DMatrix<f64>, b: DMatrix<f64>) -> (LiftedModelEstimate, ObservableDictionary) {
        let n = a.nrows();
        let mut w = DMatrix::zeros(n, n + b.ncols());
        w.view_mut((0, 0), (n, n)).copy_from(&a);
        w.view_mut((0, n), (n, b.ncols())).copy_from(&b);
        (
            LiftedModelEstimate::new(w, DMatrix::identity(n, n), 0.1).unwrap(),
            ObservableDictionary::polynomial(n, 1).unwrap(),
        )
    }

    #[test]
    fn perfect_model_has_zero_e_dyn() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 0.1]);
        let (model, dict) = identity_model(a.clone(), b.clone());
        let mut states = vec![DVector::from_row_slice(&[1.0, -1.0])];
        let inputs: Vec<_> = (0..15).map(|k| DVector::from_element(1, (k as f64).sin())).collect();
        for u in &inputs {
            let next = &a * states.last().unwrap() + &b * u;
            states.push(next);
        }
        assert!(compute_e_dyn(&model, &dict, &states, &inputs).unwrap() < 1e-12);
    }

    #[test]
    fn zero_model_gives_rms_of_truth() {
        let (model, dict) = identity_model(DMatrix::zeros(1, 1), DMatrix::zeros(1, 1));
        let states: Vec<_> = [0.5, 1.0, 2.0, 2.0].iter().map(|v| DVector::from_element(1, *v)).collect();
        let inputs = vec![DVector::zeros(1); 3];
        let e = compute_e_dyn(&model, &dict, &states, &inputs).unwrap();
        assert!((e - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn two_step_toy() {
        // x⁺ = 0.5 x + u predicted from 1 with inputs (1, 0): 1.5, 0.75; truth 1.0, 1.0
        let (model, dict) = identity_model(DMatrix::from_element(1, 1, 0.5), DMatrix::from_element(1, 1, 1.0));
        let states: Vec<_> = [1.0, 1.0, 1.0].iter().map(|v| DVector::from_element(1, *v)).collect();
        let inputs = vec![DVector::from_element(1, 1.0), DVector::zeros(1)];
        let e = compute_e_dyn(&model, &dict, &states, &inputs).unwrap();
        assert!((e - ((0.25 + 0.0625) / 2.0f64).sqrt()).abs() < 1e-15);
        assert!(compute_e_dyn(&model, &dict, &states[..2], &inputs).is_err());
    }

    #[test]
    fn settling_time_detects_entry_into_band() {
        let series: Vec<(f64, f64)> = (0..100)
            .map(|k| {
                let t = k as f64 * 0.1;
                (t, if t < 3.0 { 5.0 } else { 1.0 })
            })
            .collect();
        assert!((settling_time(&series, 0.5, 0.1) - 3.0).abs() < 1e-12);
        assert!(settling_time(&[], 0.5, 0.1).is_nan());
    }

    #[test]
    fn rmse_and_terminal_mean() {
        assert_eq!(rmse(&[3.0, 4.0]), (12.5f64).sqrt());
        assert_eq!(terminal_mean(&[1.0, 2.0, 3.0, 5.0], 2), 4.0);
    }
}
