use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Adam hyperparameters. Moment constants default to 0.9 / 0.999 / 1e-8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self { learning_rate, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self::with_learning_rate(0.01)
    }
}

/// Adam moment estimates for a flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<S> {
    pub config: AdamConfig,
    pub first_moment: Vec<S>,
    pub second_moment: Vec<S>,
    pub step_count: u64,
}

impl<S: Real> AdamState<S> {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self {
            config,
            first_moment: vec![S::zero(); n_params],
            second_moment: vec![S::zero(); n_params],
            step_count: 0,
        }
    }

    /// One bias-corrected Adam update of `params` in place.
    ///
    /// A non-finite gradient leaves both parameters and state untouched.
    pub fn step(&mut self, params: &mut [S], grads: &[S]) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::Shape { expected: self.first_moment.len(), got: params.len() });
        }
        if grads.len() != params.len() {
            return Err(Error::Shape { expected: params.len(), got: grads.len() });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::Diverged {
                epoch: self.step_count as usize,
                what: format!("non-finite gradient at parameter {i}"),
            });
        }
        self.step_count += 1;
        let c = &self.config;
        let (b1, b2) = (S::lit(c.beta1), S::lit(c.beta2));
        let (one_b1, one_b2) = (S::one() - b1, S::one() - b2);
        let t = self.step_count as i32;
        let bc1 = S::one() - S::lit(c.beta1.powi(t));
        let bc2 = S::one() - S::lit(c.beta2.powi(t));
        let (lr, eps) = (S::lit(c.learning_rate), S::lit(c.eps));
        for i in 0..params.len() {
            let g = grads[i];
            let m = b1 * self.first_moment[i] + one_b1 * g;
            let v = b2 * self.second_moment[i] + one_b2 * g * g;
            self.first_moment[i] = m;
            self.second_moment[i] = v;
            let m_hat = m / bc1;
            let v_hat = v / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
