//! Importance-weighted score estimator (wake-phase update).
//!
//! Draws `n_particles` latents from q, self-normalizes their importance
//! weights w_i proportional to p(x, z_i)/q(z_i) in log space, and combines
//! the per-particle scores:
//!
//! ```text
//! g_hat = sum_i w_tilde_i * grad ln q(z_i)
//! ```
//!
//! The update tightens q toward the posterior that the weighted particles
//! approximate; at q = posterior the weights are uniform and the estimate
//! collapses to the mean score, which vanishes in expectation.

use crate::estimators::{EstimatorError, GradientEstimate, Result};
use crate::model::ScoreModel;
use crate::params::ParamVector;
use crate::rng::RngStream;
use crate::stats::log_sum_exp;

pub fn rws_gradient<M: ScoreModel + ?Sized>(
    model: &M,
    params: &ParamVector,
    n_particles: usize,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    if n_particles < 2 {
        return Err(EstimatorError::InvalidParticleCount(n_particles));
    }
    let mut latents = Vec::with_capacity(n_particles);
    let mut log_weights = Vec::with_capacity(n_particles);
    for i in 0..n_particles {
        let z = model.sample_latent(params, rng)?;
        let lw = model.log_joint(z) - model.log_q(params, z)?;
        if !lw.is_finite() {
            return Err(EstimatorError::NonFiniteObjective { index: i });
        }
        latents.push(z);
        log_weights.push(lw);
    }
    let norm = log_sum_exp(&log_weights).expect("non-empty by construction");

    let mut grad = vec![0.0; params.len()];
    for (z, lw) in latents.iter().zip(&log_weights) {
        let w = (lw - norm).exp();
        for (g, s) in grad.iter_mut().zip(model.score(params, *z)?) {
            *g += w * s;
        }
    }
    GradientEstimate::checked(grad, n_particles, "rws")
}
