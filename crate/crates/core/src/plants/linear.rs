use nalgebra::{DMatrix, DVector};

use super::Plant;
use crate::error::{check_len, CoreError, Result};

/// Continuous-time linear plant `ẋ = A x + B u`, with the input gain multiplied by
/// `gain_shift` while the shift is active.
#[derive(Debug, Clone)]
pub struct LinearPlant {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    lower: DVector<f64>,
    upper: DVector<f64>,
    gain_shift: f64,
    feedback: Option<DMatrix<f64>>,
    active: bool,
}

impl LinearPlant {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>, lower: DVector<f64>, upper: DVector<f64>) -> Result<Self> {
        let n = a.nrows();
        check_len("linear plant A cols", n, a.ncols())?;
        check_len("linear plant B rows", n, b.nrows())?;
        check_len("linear plant lower", b.ncols(), lower.len())?;
        check_len("linear plant upper", b.ncols(), upper.len())?;
        if lower.iter().zip(upper.iter()).any(|(l, u)| l > u) {
            return Err(CoreError::InvalidParameter("input bounds have lower > upper".into()));
        }
        Ok(Self {
            a,
            b,
            lower,
            upper,
            gain_shift: 1.0,
            feedback: None,
            active: false,
        })
    }

    pub fn with_gain_shift(mut self, gain: f64) -> Self {
        self.gain_shift = gain;
        self
    }

    /// State feedback `u = K (target − x)` used for data collection.
    pub fn with_feedback(mut self, k: DMatrix<f64>) -> Self {
        self.feedback = Some(k);
        self
    }
}

impl Plant for LinearPlant {
    fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    fn derivative(&self, _t: f64, x: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("linear plant state", self.state_dim(), x.len())?;
        check_len("linear plant input", self.input_dim(), u.len())?;
        let gain = if self.active { self.gain_shift } else { 1.0 };
        Ok(&self.a * x + &self.b * self.clip_input(u) * gain)
    }

    fn input_bounds(&self) -> (DVector<f64>, DVector<f64>) {
        (self.lower.clone(), self.upper.clone())
    }

    fn stabilizing_input(&self, x: &DVector<f64>, target: &DVector<f64>) -> DVector<f64> {
        match &self.feedback {
            Some(k) => self.clip_input(&(k * (target - x))),
            None => DVector::zeros(self.input_dim()),
        }
    }

    fn set_shift_active(&mut self, active: bool) {
        self.active = active;
    }

    fn shift_active(&self) -> bool {
        self.active
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivative_and_shift() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b = DMatrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let mut plant = LinearPlant::new(a, b, DVector::from_element(1, -1.0), DVector::from_element(1, 1.0))
            .unwrap()
            .with_gain_shift(0.5);
        let x = DVector::from_row_slice(&[1.0, 2.0]);
        let u = DVector::from_element(1, 3.0);
        assert_eq!(plant.derivative(0.0, &x, &u).unwrap(), DVector::from_row_slice(&[2.0, 1.0]));
        plant.set_shift_active(true);
        assert_eq!(plant.derivative(0.0, &x, &u).unwrap(), DVector::from_row_slice(&[2.0, 0.5]));
    }
}
