//! First-order ascent optimizers for stochastic ELBO gradients.
//!
//! Both update rules follow the *ascent* convention: a positive gradient
//! coordinate moves its parameter up. Adam uses the standard
//! bias-corrected moment estimates; the step magnitude is then roughly the
//! learning rate per coordinate regardless of gradient scale, which is what
//! makes one learning rate workable across estimators with very different
//! gradient variances. An optional max-norm clip is applied to raw
//! gradients before they enter the moment accumulators, bounding the
//! influence of single heavy-tailed estimates.

use crate::params::ParamVector;
use thiserror::Error;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum OptimizerError {
    /// A parameter became NaN or infinite after the update.
    #[error("parameter coordinate {coordinate} became non-finite after the update")]
    NonFiniteUpdate { coordinate: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    /// Rescale gradients whose L2 norm exceeds this bound.
    pub clip_norm: Option<f64>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::Adam, learning_rate: 0.01, clip_norm: None }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    config: OptimizerConfig,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
    step_count: u32,
}

impl Optimizer {
    pub fn new(config: OptimizerConfig, dim: usize) -> Self {
        assert!(
            config.learning_rate.is_finite() && config.learning_rate > 0.0,
            "learning rate must be positive and finite"
        );
        if let Some(c) = config.clip_norm {
            assert!(c.is_finite() && c > 0.0, "clip norm must be positive and finite");
        }
        Self {
            config,
            first_moment: vec![0.0; dim],
            second_moment: vec![0.0; dim],
            step_count: 0,
        }
    }

    pub fn config(&self) -> &OptimizerConfig {
        &self.config
    }

    /// Applies one ascent step in place.
    pub fn step(&mut self, params: &mut ParamVector, grad: &[f64]) -> Result<(), OptimizerError> {
        assert_eq!(grad.len(), params.len(), "gradient dimension mismatch");
        let mut grad = grad.to_vec();
        if let Some(bound) = self.config.clip_norm {
            let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            if norm > bound {
                let scale = bound / norm;
                for g in &mut grad {
                    *g *= scale;
                }
            }
        }

        let lr = self.config.learning_rate;
        match self.config.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.values_mut().iter_mut().zip(&grad) {
                    *p += lr * g;
                }
            }
            OptimizerKind::Adam => {
                self.step_count += 1;
                let bc1 = 1.0 - ADAM_BETA1.powi(self.step_count as i32);
                let bc2 = 1.0 - ADAM_BETA2.powi(self.step_count as i32);
                for (k, p) in params.values_mut().iter_mut().enumerate() {
                    let g = grad[k];
                    let m = &mut self.first_moment[k];
                    let v = &mut self.second_moment[k];
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * g;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *p += lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
            }
        }

        if let Some(coordinate) = params.values().iter().position(|p| !p.is_finite()) {
            return Err(OptimizerError::NonFiniteUpdate { coordinate });
        }
        Ok(())
    }
}
