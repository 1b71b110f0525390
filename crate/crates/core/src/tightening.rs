//! Data-driven constraint tightening: EMA of the physical-space disturbance,
//! nonconformity scores, and the warmup / conformal tightening scalar.

use std::collections::VecDeque;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::adaptation::ContractionEnvelope;
use crate::error::{check_len, CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TighteningParams {
    pub alpha_ema: f64,
    pub n_conf: usize,
    pub k_warm: usize,
    pub chi: f64,
    pub eps_ema: f64,
    /// Use `max(δ_ana, δ_conf)` instead of the conformal scalar alone.
    pub combine_analytical: bool,
}

impl Default for TighteningParams {
    fn default() -> Self {
        Self {
            alpha_ema: 0.1,
            n_conf: 50,
            k_warm: 100,
            chi: 0.01,
            eps_ema: 0.0,
            combine_analytical: false,
        }
    }
}

impl TighteningParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.alpha_ema) {
            return Err(CoreError::InvalidParameter(format!(
                "alpha_ema {} outside [0, 1)",
                self.alpha_ema
            )));
        }
        if !(self.chi > 0.0 && self.chi < 1.0) {
            return Err(CoreError::InvalidParameter(format!("chi {} outside (0, 1)", self.chi)));
        }
        if self.n_conf == 0 {
            return Err(CoreError::InvalidParameter("n_conf must be >= 1".into()));
        }
        if !(self.eps_ema >= 0.0) {
            return Err(CoreError::InvalidParameter("eps_ema must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Components of the tightening scalar at one step, for logging.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TighteningBreakdown {
    pub warmup: f64,
    pub conformal: f64,
    pub implemented: f64,
}

#[derive(Debug, Clone)]
pub struct TighteningState {
    params: TighteningParams,
    ema: DVector<f64>,
    scores: VecDeque<f64>,
    raw_norms: VecDeque<f64>,
    observations: usize,
}

impl TighteningState {
    pub fn new(n: usize, params: TighteningParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            params,
            ema: DVector::zeros(n),
            scores: VecDeque::with_capacity(params.n_conf),
            raw_norms: VecDeque::with_capacity(params.n_conf),
            observations: 0,
        })
    }

    pub fn params(&self) -> &TighteningParams {
        &self.params
    }

    pub fn ema(&self) -> &DVector<f64> {
        &self.ema
    }

    pub fn scores(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.scores.iter().copied()
    }

    pub fn raw_norms(&self) -> impl ExactSizeIterator<Item = f64> + '_ {
        self.raw_norms.iter().copied()
    }

    pub fn observations(&self) -> usize {
        self.observations
    }

    /// Updates the EMA with `s_k`, stores the score `‖s_k − ŝ_k‖` and `‖s_k‖`, and
    /// returns the score.
    pub fn observe_disturbance(&mut self, s: &DVector<f64>) -> Result<f64> {
        check_len("disturbance", self.ema.len(), s.len())?;
        if !s.iter().all(|v| v.is_finite()) {
            return Err(CoreError::NonFinite("disturbance"));
        }
        let a = self.params.alpha_ema;
        self.ema = &self.ema * a + s * (1.0 - a);
        let r = (s - &self.ema).norm();
        if self.scores.len() == self.params.n_conf {
            self.scores.pop_front();
            self.raw_norms.pop_front();
        }
        self.scores.push_back(r);
        self.raw_norms.push_back(s.norm());
        self.observations += 1;
        Ok(r)
    }

    /// Tightening scalar for step `k` from the scores observed so far.
    pub fn delta_implemented(&self, k: usize) -> Result<f64> {
        Ok(self.breakdown(k, None)?.implemented)
    }

    /// Tightening scalar with the analytical bound available for the combined rule.
    pub fn breakdown(&self, k: usize, delta_ana: Option<f64>) -> Result<TighteningBreakdown> {
        if self.scores.is_empty() {
            return Err(CoreError::EmptyWindow("tightening has no observations"));
        }
        let chi = self.params.chi;
        let raw: Vec<f64> = self.raw_norms.iter().copied().collect();
        let scores: Vec<f64> = self.scores.iter().copied().collect();
        let warmup = conformal_quantile(&raw, chi)?;
        let conformal = conformal_quantile(&scores, chi)? + self.params.eps_ema;
        let mut implemented = if k < self.params.k_warm { warmup } else { conformal };
        if self.params.combine_analytical {
            if let Some(ana) = delta_ana {
                implemented = implemented.max(ana);
            }
        }
        Ok(TighteningBreakdown {
            warmup,
            conformal,
            implemented,
        })
    }
}

/// Empirical `(1 − χ)`-quantile: the smallest score `τ` with
/// `|{r ≤ τ}| / W ≥ 1 − χ`.
pub fn conformal_quantile(scores: &[f64], chi: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(CoreError::EmptyWindow("conformal quantile"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let w = sorted.len() as f64;
    let target = 1.0 - chi;
    for (i, &r) in sorted.iter().enumerate() {
        // tolerance absorbs rounding in 1 − χ
        if (i + 1) as f64 / w >= target - 1e-12 {
            return Ok(r);
        }
    }
    Ok(*sorted.last().expect("nonempty"))
}

/// `δ_ana = v_max Ē_k`.
pub fn delta_analytical(env: &ContractionEnvelope, k: usize) -> Result<f64> {
    env.analytical_bound(k)
}

/// Empirical miss rate `violations / total`.
pub fn coverage_estimate(violations: usize, total: usize) -> Result<f64> {
    if total == 0 {
        return Err(CoreError::InvalidParameter("coverage needs at least one step".into()));
    }
    Ok(violations as f64 / total as f64)
}
