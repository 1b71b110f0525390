//! Sliding-window contractive adaptation of the stacked operator `Ŵ = [Â B̂]` and the
//! error envelopes that go with it.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_len, CoreError, Result};
use crate::lifting::NominalModel;
use crate::linalg::{contraction_factor, lambda_max, symmetrize};

/// Ring buffer of the most recent `(v, z_next)` pairs.
#[derive(Debug, Clone)]
pub struct AdaptationWindow {
    capacity: usize,
    gamma: f64,
    p: usize,
    m: usize,
    entries: VecDeque<(DVector<f64>, DVector<f64>)>,
}

impl AdaptationWindow {
    pub fn new(capacity: usize, gamma: f64, p: usize, m: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(CoreError::InvalidParameter("window length must be >= 1".into()));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "forgetting factor {gamma} outside (0, 1]"
            )));
        }
        Ok(Self {
            capacity,
            gamma,
            p,
            m,
            entries: VecDeque::with_capacity(capacity),
        })
    }

    pub fn push(&mut self, v: DVector<f64>, z_next: DVector<f64>) -> Result<()> {
        check_len("window regressor", self.p + self.m, v.len())?;
        check_len("window observation", self.p, z_next.len())?;
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back((v, z_next));
        Ok(())
    }

    pub fn fill(&self) -> usize {
        self.entries.len()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Stored pairs, oldest first.
    pub fn entries(&self) -> impl Iterator<Item = (&DVector<f64>, &DVector<f64>)> {
        self.entries.iter().map(|(v, z)| (v, z))
    }

    /// Forgetting weights aligned with [`Self::entries`]; the newest entry has weight 1.
    pub fn weights(&self) -> Vec<f64> {
        let fill = self.fill();
        (0..fill)
            .map(|j| self.gamma.powi((fill - 1 - j) as i32))
            .collect()
    }

    /// Regressor matrix `V`, one column per stored entry (oldest first).
    pub fn regressors(&self) -> DMatrix<f64> {
        let mut v = DMatrix::zeros(self.p + self.m, self.fill());
        for (j, (col, _)) in self.entries.iter().enumerate() {
            v.set_column(j, col);
        }
        v
    }

    pub fn observations(&self) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.p, self.fill());
        for (j, (_, col)) in self.entries.iter().enumerate() {
            z.set_column(j, col);
        }
        z
    }

    /// `G = Σ γ^age v vᵀ`.
    pub fn gramian(&self) -> Result<DMatrix<f64>> {
        if self.is_empty() {
            return Err(CoreError::EmptyWindow("gramian"));
        }
        let d = self.p + self.m;
        let mut g = DMatrix::zeros(d, d);
        for ((v, _), w) in self.entries.iter().zip(self.weights()) {
            g.ger(w, v, v, 1.0);
        }
        symmetrize(&mut g);
        Ok(g)
    }

    /// `Z − Ŵ V`.
    pub fn prediction_error_matrix(&self, w_hat: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if self.is_empty() {
            return Err(CoreError::EmptyWindow("prediction error"));
        }
        check_len("estimate rows", self.p, w_hat.nrows())?;
        check_len("estimate columns", self.p + self.m, w_hat.ncols())?;
        Ok(self.observations() - w_hat * self.regressors())
    }
}

/// Step-size rule for the adaptation law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "policy", rename_all = "snake_case")]
pub enum EtaPolicy {
    /// `η = scale / λ_max(G)` clipped to `[1e-6, 1e3]`.
    InverseLambdaMax { scale: f64 },
    Constant { eta: f64 },
}

impl Default for EtaPolicy {
    fn default() -> Self {
        EtaPolicy::InverseLambdaMax { scale: 1.0 }
    }
}

impl EtaPolicy {
    pub fn resolve(&self, g: &DMatrix<f64>) -> f64 {
        match *self {
            EtaPolicy::InverseLambdaMax { scale } => {
                let lmax = lambda_max(g);
                if lmax > 0.0 {
                    (scale / lmax).clamp(1e-6, 1e3)
                } else {
                    1e3
                }
            }
            EtaPolicy::Constant { eta } => eta,
        }
    }
}

/// Current estimate `Ŵ_k = [Â_k B̂_k]` together with the offline nominal operator.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedModelEstimate {
    w_hat: DMatrix<f64>,
    nominal: DMatrix<f64>,
    c: DMatrix<f64>,
    p: usize,
    m: usize,
    pub eta: f64,
    version: u64,
}

impl LiftedModelEstimate {
    pub fn new(w_hat: DMatrix<f64>, c: DMatrix<f64>, eta: f64) -> Result<Self> {
        let p = w_hat.nrows();
        if w_hat.ncols() < p {
            return Err(CoreError::InvalidParameter(
                "stacked estimate needs at least p columns".into(),
            ));
        }
        check_len("selector columns", p, c.ncols())?;
        let m = w_hat.ncols() - p;
        Ok(Self {
            nominal: w_hat.clone(),
            w_hat,
            c,
            p,
            m,
            eta,
            version: 0,
        })
    }

    pub fn from_nominal(model: &NominalModel, eta: f64) -> Self {
        Self::new(model.stacked(), model.c.clone(), eta).expect("nominal model is consistent")
    }

    pub fn w_hat(&self) -> &DMatrix<f64> {
        &self.w_hat
    }

    pub fn nominal(&self) -> &DMatrix<f64> {
        &self.nominal
    }

    pub fn a(&self) -> DMatrix<f64> {
        self.w_hat.columns(0, self.p).into_owned()
    }

    pub fn b(&self) -> DMatrix<f64> {
        self.w_hat.columns(self.p, self.m).into_owned()
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn lifted_dim(&self) -> usize {
        self.p
    }

    pub fn input_dim(&self) -> usize {
        self.m
    }

    pub fn state_dim(&self) -> usize {
        self.c.nrows()
    }

    /// Incremented on every update; lets the control loop prove which snapshot it used.
    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn set_w_hat(&mut self, w_hat: DMatrix<f64>) -> Result<()> {
        check_len("estimate rows", self.p, w_hat.nrows())?;
        check_len("estimate columns", self.p + self.m, w_hat.ncols())?;
        self.w_hat = w_hat;
        self.version += 1;
        Ok(())
    }

    /// One-step prediction `Ŵ v`.
    pub fn predict(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("regressor", self.p + self.m, v.len())?;
        Ok(&self.w_hat * v)
    }

    /// `Ŵ ← Ŵ + η E_pred Γ Vᵀ`.
    pub fn adapt(&mut self, window: &AdaptationWindow) -> Result<()> {
        let next = adapt(self, window)?;
        *self = next;
        Ok(())
    }
}

/// Pure form of the adaptation law.
pub fn adapt(est: &LiftedModelEstimate, window: &AdaptationWindow) -> Result<LiftedModelEstimate> {
    let e_pred = window.prediction_error_matrix(&est.w_hat)?;
    let mut weighted = window.regressors();
    for (j, w) in window.weights().into_iter().enumerate() {
        weighted.column_mut(j).scale_mut(w);
    }
    let update = e_pred * weighted.transpose() * est.eta;
    let mut next = est.clone();
    next.w_hat += update;
    next.version += 1;
    if !next.w_hat.iter().all(|v| v.is_finite()) {
        return Err(CoreError::NonFinite("adapted estimate"));
    }
    Ok(next)
}

/// `2 / λ_max(G)`.
pub fn step_size_bound(g: &DMatrix<f64>) -> Result<f64> {
    let lmax = lambda_max(g);
    if !(lmax > 0.0) {
        return Err(CoreError::InvalidParameter(
            "step-size bound undefined for a Gramian with no positive eigenvalue".into(),
        ));
    }
    Ok(2.0 / lmax)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractionEnvelope {
    pub rho: f64,
    pub nu: f64,
    pub e0_norm: f64,
    pub v_max: f64,
    pub w: usize,
    pub eta: f64,
}

impl ContractionEnvelope {
    fn check(&self) -> Result<()> {
        let finite = [self.rho, self.nu, self.e0_norm, self.v_max, self.eta]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(CoreError::NonFinite("contraction envelope"));
        }
        if !(self.rho >= 0.0 && self.rho < 1.0) {
            return Err(CoreError::InvalidParameter(format!(
                "envelope needs rho in [0, 1), got {}",
                self.rho
            )));
        }
        Ok(())
    }

    /// `Ē_k = ρ^k ‖E_0‖ + (1 − ρ^k) ν / (1 − ρ)`.
    pub fn error_envelope(&self, k: usize) -> Result<f64> {
        self.check()?;
        let rk = self.rho.powf(k as f64);
        Ok(rk * self.e0_norm + (1.0 - rk) * self.nu / (1.0 - self.rho))
    }

    /// Limit of the envelope as `k → ∞`.
    pub fn ultimate_bound(&self) -> Result<f64> {
        self.check()?;
        Ok(self.nu / (1.0 - self.rho))
    }

    /// `μ_k = η Ē_k v_max √w`.
    pub fn update_perturbation_bound(&self, k: usize) -> Result<f64> {
        Ok(self.eta * self.error_envelope(k)? * self.v_max * (self.w as f64).sqrt())
    }

    /// `δ_ana = v_max Ē_k`.
    pub fn analytical_bound(&self, k: usize) -> Result<f64> {
        Ok(self.v_max * self.error_envelope(k)?)
    }

    /// `δ⁺_k = v_max Ē_k (1 + η v_max √w)`.
    pub fn composite_bound(&self, k: usize) -> Result<f64> {
        let e = self.error_envelope(k)?;
        Ok(self.v_max * e * (1.0 + self.eta * self.v_max * (self.w as f64).sqrt()))
    }
}

/// Online estimates of the envelope constants: `ρ` as the largest observed
/// `‖I − ηG_k‖₂` (capped below one), `v_max` as a running maximum with a floor and
/// `η` as the largest step used so far.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeTracker {
    rho: f64,
    v_max: f64,
    eta: f64,
    pub e0_norm: f64,
    pub nu: f64,
    w: usize,
}

pub const RHO_CAP: f64 = 1.0 - 1e-6;

impl EnvelopeTracker {
    pub fn new(w: usize, e0_norm: f64, nu: f64, v_max_floor: f64) -> Self {
        Self {
            rho: 0.0,
            v_max: v_max_floor.max(0.0),
            eta: 0.0,
            e0_norm,
            nu,
            w,
        }
    }

    /// Records one adaptation step and returns the step's contraction factor.
    pub fn observe(&mut self, g: &DMatrix<f64>, eta: f64, v: &DVector<f64>) -> f64 {
        let rho_k = contraction_factor(g, eta);
        self.rho = self.rho.max(rho_k.min(RHO_CAP));
        self.v_max = self.v_max.max(v.norm());
        self.eta = self.eta.max(eta);
        rho_k
    }

    pub fn envelope(&self) -> ContractionEnvelope {
        ContractionEnvelope {
            rho: self.rho,
            nu: self.nu,
            e0_norm: self.e0_norm,
            v_max: self.v_max,
            w: self.w,
            eta: self.eta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{lambda_min, sym_eigenvalues};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(v)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize, scale: f64) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| scale * (rng.random::<f64>() * 2.0 - 1.0))
    }

    #[test]
    fn push_fills_and_evicts_in_order() {
        let mut w = AdaptationWindow::new(3, 1.0, 1, 1).unwrap();
        assert_eq!(w.fill(), 0);
        w.push(dv(&[0.0, 0.0]), dv(&[0.0])).unwrap();
        assert_eq!(w.fill(), 1);
        for i in 1..5 {
            w.push(dv(&[i as f64, 0.0]), dv(&[i as f64])).unwrap();
        }
        assert_eq!(w.fill(), 3);
        let firsts: Vec<f64> = w.entries().map(|(v, _)| v[0]).collect();
        assert_eq!(firsts, vec![2.0, 3.0, 4.0]);
        assert!(w.push(dv(&[1.0]), dv(&[1.0])).is_err());
    }

    #[test]
    fn gramian_examples() {
        let mut w = AdaptationWindow::new(4, 1.0, 1, 1).unwrap();
        assert!(w.gramian().is_err());
        w.push(dv(&[1.0, 0.0]), dv(&[0.0])).unwrap();
        assert_eq!(w.gramian().unwrap(), DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]));

        let mut w = AdaptationWindow::new(4, 0.5, 1, 1).unwrap();
        w.push(dv(&[1.0, 0.0]), dv(&[0.0])).unwrap();
        w.push(dv(&[0.0, 1.0]), dv(&[0.0])).unwrap();
        assert_eq!(w.gramian().unwrap(), DMatrix::from_diagonal(&dv(&[0.5, 1.0])));

        let mut w = AdaptationWindow::new(3, 1.0, 2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for v in [[s, s, 0.0], [s, -s, 0.0], [0.0, 0.0, 1.0]] {
            w.push(dv(&v), dv(&[0.0, 0.0])).unwrap();
        }
        for ev in sym_eigenvalues(&w.gramian().unwrap()) {
            assert!((ev - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gramian_single_entry_is_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v = random_matrix(&mut rng, 5, 1, 1.0).column(0).into_owned();
        let mut w = AdaptationWindow::new(2, 0.9, 3, 2).unwrap();
        w.push(v.clone(), dv(&[0.0; 3])).unwrap();
        assert!((w.gramian().unwrap() - &v * v.transpose()).amax() < 1e-15);
    }

    #[test]
    fn prediction_error_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let w_star = random_matrix(&mut rng, 2, 3, 1.0);
        let mut w = AdaptationWindow::new(5, 0.8, 2, 1).unwrap();
        for _ in 0..4 {
            let v = random_matrix(&mut rng, 3, 1, 1.0).column(0).into_owned();
            let z = &w_star * &v;
            w.push(v, z).unwrap();
        }
        assert!(w.prediction_error_matrix(&w_star).unwrap().amax() < 1e-15);
        assert_eq!(w.prediction_error_matrix(&DMatrix::zeros(2, 3)).unwrap(), w.observations());

        let w_hat = random_matrix(&mut rng, 2, 3, 1.0);
        let e = w.prediction_error_matrix(&w_hat).unwrap();
        for (j, (v, z)) in w.entries().enumerate() {
            let col = z - &w_hat * v;
            assert!((e.column(j) - col).amax() <= 1e-14);
        }
    }

    #[test]
    fn adapt_examples() {
        // fixed point
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w_star = random_matrix(&mut rng, 2, 3, 1.0);
        let mut win = AdaptationWindow::new(4, 1.0, 2, 1).unwrap();
        for _ in 0..4 {
            let v = random_matrix(&mut rng, 3, 1, 1.0).column(0).into_owned();
            let z = &w_star * &v;
            win.push(v, z).unwrap();
        }
        let est = LiftedModelEstimate::new(w_star.clone(), DMatrix::identity(2, 2), 0.3).unwrap();
        let next = adapt(&est, &win).unwrap();
        assert!((next.w_hat() - &w_star).amax() < 1e-14);

        // contraction with a valid step
        let g = win.gramian().unwrap();
        let eta = 0.9 * step_size_bound(&g).unwrap();
        let start = LiftedModelEstimate::new(DMatrix::zeros(2, 3), DMatrix::identity(2, 2), eta).unwrap();
        let next = adapt(&start, &win).unwrap();
        assert!((&w_star - next.w_hat()).norm() < w_star.norm());
        assert!(next.version() > start.version());
    }

    #[test]
    fn adapt_scalar_example() {
        // W* = 2, Ŵ = 0, v = 1, η = 0.5: Ŵ' = 0 + 0.5 (2 − 0) 1 = 1
        let mut win = AdaptationWindow::new(1, 1.0, 1, 0).unwrap();
        win.push(dv(&[1.0]), dv(&[2.0])).unwrap();
        let est = LiftedModelEstimate::new(DMatrix::zeros(1, 1), DMatrix::identity(1, 1), 0.5).unwrap();
        assert_eq!(adapt(&est, &win).unwrap().w_hat()[(0, 0)], 1.0);
    }

    #[test]
    fn step_size_bound_examples() {
        assert_eq!(step_size_bound(&DMatrix::identity(3, 3)).unwrap(), 2.0);
        assert_eq!(step_size_bound(&DMatrix::from_diagonal(&dv(&[4.0, 1.0]))).unwrap(), 0.5);
        assert!(step_size_bound(&DMatrix::zeros(2, 2)).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_matrix(&mut rng, 4, 4, 1.0);
        let g = &a * a.transpose();
        let eig = g.clone().symmetric_eigen();
        let lmax = eig.eigenvalues.max();
        assert!((step_size_bound(&g).unwrap() - 2.0 / lmax).abs() < 1e-10);
    }

    #[test]
    fn envelope_examples() {
        let env = ContractionEnvelope { rho: 0.5, nu: 0.1, e0_norm: 1.0, v_max: 1.0, w: 4, eta: 1.0 };
        assert!((env.error_envelope(2).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(env.error_envelope(0).unwrap(), 1.0);
        let still = ContractionEnvelope { nu: 0.0, ..env };
        assert!(still.error_envelope(500).unwrap() < 1e-100);
        assert_eq!(still.error_envelope(3).unwrap(), 0.125);
        let bad = ContractionEnvelope { rho: 1.0, ..env };
        assert!(bad.error_envelope(1).is_err());
    }

    #[test]
    fn perturbation_and_composite_examples() {
        // Ē = 0.5 via ρ = 0, ν = 0.5
        let env = ContractionEnvelope { rho: 0.0, nu: 0.5, e0_norm: 0.0, v_max: 1.0, w: 4, eta: 1.0 };
        assert!((env.update_perturbation_bound(1).unwrap() - 1.0).abs() < 1e-15);
        let zero = ContractionEnvelope { nu: 0.0, ..env };
        assert_eq!(zero.update_perturbation_bound(1).unwrap(), 0.0);
        assert_eq!(zero.composite_bound(1).unwrap(), 0.0);
        let wide = ContractionEnvelope { w: 16, ..env };
        assert!(wide.update_perturbation_bound(1).unwrap() > env.update_perturbation_bound(1).unwrap());

        let c = ContractionEnvelope { rho: 0.0, nu: 0.5, e0_norm: 0.0, v_max: 2.0, w: 9, eta: 0.1 };
        assert!((c.composite_bound(1).unwrap() - 1.6).abs() < 1e-14);
        let no_step = ContractionEnvelope { eta: 0.0, ..c };
        assert_eq!(no_step.composite_bound(1).unwrap(), no_step.analytical_bound(1).unwrap());
    }

    #[test]
    fn eta_policy_resolves_inverse_lambda_max() {
        let g = DMatrix::from_diagonal(&dv(&[4.0, 1.0]));
        assert_eq!(EtaPolicy::default().resolve(&g), 0.25);
        assert_eq!(EtaPolicy::Constant { eta: 0.1 }.resolve(&g), 0.1);
        assert_eq!(EtaPolicy::default().resolve(&DMatrix::zeros(2, 2)), 1e3);
    }

    #[test]
    fn tracker_caps_rho_below_one() {
        let mut t = EnvelopeTracker::new(3, 1.0, 0.0, 0.5);
        let g = DMatrix::from_diagonal(&dv(&[1.0, 0.0]));
        let rho_k = t.observe(&g, 1.0, &dv(&[0.1, 0.0]));
        assert_eq!(rho_k, 1.0);
        let env = t.envelope();
        assert_eq!(env.rho, RHO_CAP);
        assert_eq!(env.v_max, 0.5);
        assert!(env.error_envelope(10).is_ok());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(100))]

            #[test]
            fn error_recursion_identity(seed in any::<u64>(), p in 1usize..4, m in 1usize..3, steps in 1usize..12) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = p + m;
                let cap = d + 1;
                let mut regs: VecDeque<DVector<f64>> = VecDeque::new();
                let mut w_star = random_matrix(&mut rng, p, d, 1.0);
                let mut est = LiftedModelEstimate::new(random_matrix(&mut rng, p, d, 1.0), DMatrix::zeros(0, p), 0.1).unwrap();
                for _ in 0..steps {
                    if regs.len() == cap {
                        regs.pop_front();
                    }
                    regs.push_back(random_matrix(&mut rng, d, 1, 1.0).column(0).into_owned());
                    // window observations come from the operator in force at this step
                    let mut win = AdaptationWindow::new(cap, 0.9, p, m).unwrap();
                    for v in &regs {
                        win.push(v.clone(), &w_star * v).unwrap();
                    }
                    let e_k = &w_star - est.w_hat();
                    let g = win.gramian().unwrap();
                    est.eta = EtaPolicy::default().resolve(&g);
                    est.adapt(&win).unwrap();
                    let drift = random_matrix(&mut rng, p, d, 1e-3);
                    let w_next = &w_star + &drift;
                    let predicted = &e_k * (DMatrix::identity(d, d) - g * est.eta) + &drift;
                    let actual = &w_next - est.w_hat();
                    prop_assert!((predicted - actual).norm() <= 1e-10);
                    w_star = w_next;
                }
            }

            #[test]
            fn non_expansive_and_contractive(seed in any::<u64>(), p in 1usize..4, m in 1usize..3, frac in 0.05f64..0.99) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let d = p + m;
                let w_star = random_matrix(&mut rng, p, d, 1.0);
                let mut win = AdaptationWindow::new(2 * d, 1.0, p, m).unwrap();
                let mut est = LiftedModelEstimate::new(DMatrix::zeros(p, d), DMatrix::zeros(0, p), 0.0).unwrap();
                for _ in 0..(2 * d) {
                    let v = random_matrix(&mut rng, d, 1, 1.0).column(0).into_owned();
                    let z = &w_star * &v;
                    win.push(v, z).unwrap();
                    let g = win.gramian().unwrap();
                    est.eta = frac * step_size_bound(&g).unwrap();
                    let before = (&w_star - est.w_hat()).norm();
                    est.adapt(&win).unwrap();
                    let after = (&w_star - est.w_hat()).norm();
                    prop_assert!(after <= before + 1e-12);
                    if lambda_min(&g) > 1e-9 {
                        let rho_k = contraction_factor(&g, est.eta);
                        prop_assert!(rho_k < 1.0);
                        prop_assert!(after <= rho_k * before + 1e-12);
                    }
                }
            }

            #[test]
            fn envelope_monotone_toward_ultimate_bound(rho in 0.0f64..0.999, nu in 1e-6f64..1.0, k in 0usize..200) {
                let env = ContractionEnvelope { rho, nu, e0_norm: 0.0, v_max: 1.0, w: 1, eta: 1.0 };
                let a = env.error_envelope(k).unwrap();
                let b = env.error_envelope(k + 1).unwrap();
                prop_assert!(b + 1e-15 >= a);
                prop_assert!(b <= env.ultimate_bound().unwrap() * (1.0 + 1e-12));
                prop_assert!(env.composite_bound(k).unwrap() >= env.analytical_bound(k).unwrap());
            }
        }
    }

    #[test]
    fn envelope_soundness_and_ultimate_bound_with_drift() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let (p, m, w) = (3, 2, 10);
        let d = p + m;
        let nu = 1e-3;
        let base = random_matrix(&mut rng, p, d, 1.0);
        let dir = random_matrix(&mut rng, p, d, 1.0);
        let dir = &dir / dir.norm();
        // sinusoidal drift whose per-step increment has Frobenius norm at most nu
        let omega = 0.05;
        let amp = nu / omega;
        let w_at = |k: usize| &base + &dir * (amp * (omega * k as f64).sin());
        let mut regs: VecDeque<DVector<f64>> = (0..w)
            .map(|_| random_matrix(&mut rng, d, 1, 1.0).column(0).into_owned())
            .collect();
        let mut est = LiftedModelEstimate::new(DMatrix::zeros(p, d), DMatrix::zeros(0, p), 0.0).unwrap();
        let e0 = (w_at(0) - est.w_hat()).norm();
        let mut tracker = EnvelopeTracker::new(w, e0, nu, 0.0);
        let mut errors = vec![e0];
        for k in 0..2000 {
            // the window observes the current operator
            let w_star = w_at(k);
            let mut win = AdaptationWindow::new(w, 0.95, p, m).unwrap();
            for v in &regs {
                win.push(v.clone(), &w_star * v).unwrap();
            }
            let g = win.gramian().unwrap();
            est.eta = EtaPolicy::default().resolve(&g);
            tracker.observe(&g, est.eta, regs.back().unwrap());
            est.adapt(&win).unwrap();
            errors.push((w_at(k + 1) - est.w_hat()).norm());
            regs.pop_front();
            regs.push_back(random_matrix(&mut rng, d, 1, 1.0).column(0).into_owned());
        }
        let env = tracker.envelope();
        assert!(env.rho < 1.0);
        for (k, e) in errors.iter().enumerate() {
            assert!(*e <= env.error_envelope(k).unwrap() + 1e-9, "step {k}: {e}");
        }
        let tail = errors[errors.len() - 100..].iter().cloned().fold(0.0, f64::max);
        assert!(tail <= env.ultimate_bound().unwrap() + 1e-6);
    }
}
