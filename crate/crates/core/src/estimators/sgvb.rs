//! Pathwise (reparameterization) gradient estimator.
//!
//! For models that can express their latent draw as a smooth map of the
//! variational parameters and parameter-free noise, the ELBO gradient is the
//! expectation of the pathwise derivative supplied by the model's
//! [`ReparamModel::pathwise_gradient`] hook. This estimator is the
//! single-sample Monte-Carlo version: one noise draw, one hook call.

use crate::estimators::{GradientEstimate, Result};
use crate::model::ReparamModel;
use crate::params::ParamVector;
use crate::rng::RngStream;

pub fn sgvb_gradient<M: ReparamModel + ?Sized>(
    model: &M,
    params: &ParamVector,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let (_, grad) = model.pathwise_gradient(params, rng)?;
    GradientEstimate::checked(grad, 1, "sgvb")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::NoisyScaleModel;

    #[test]
    fn theta_gradient_vanishes_at_posterior_mode_for_zero_noise() {
        // At the exact posterior parameters with the noise forced to zero
        // the pathwise theta-gradient is the log-joint slope at the
        // posterior mean, which is zero.
        let model = NoisyScaleModel::new();
        let post = model.exact_posterior();
        let mut params = model.init_params();
        params.set_scalar("mean", post.mean()).unwrap();
        params.set_scalar("log_var", 2.0 * post.std_dev().ln()).unwrap();
        let (_, grad) = model.pathwise_gradient_at(&params, 0.0).unwrap();
        assert!(grad[0].abs() < 1e-9);
    }

    #[test]
    fn unbiased_for_the_exact_elbo_gradient() {
        // Exact ELBO gradient of the conjugate model (from
        // ELBO = ln p(y) - KL(q || posterior)):
        //   d/dt = -(t - m)/s^2,  d/dl = 1/2 - e^l / (2 s^2).
        let model = NoisyScaleModel::new();
        let post = model.exact_posterior();
        let (theta, log_var): (f64, f64) = (7.8, 0.4);
        let want = [
            -(theta - post.mean()) / post.variance(),
            0.5 - log_var.exp() / (2.0 * post.variance()),
        ];
        let mut params = model.init_params();
        params.set_scalar("mean", theta).unwrap();
        params.set_scalar("log_var", log_var).unwrap();

        let mut rng = RngStream::new(12, 0);
        let trials = 200_000;
        let mut mean = [0.0; 2];
        let mut m2 = [0.0; 2];
        for _ in 0..trials {
            let g = sgvb_gradient(&model, &params, &mut rng).unwrap().grad;
            for j in 0..2 {
                mean[j] += g[j];
                m2[j] += g[j] * g[j];
            }
        }
        for j in 0..2 {
            mean[j] /= trials as f64;
            let var = m2[j] / trials as f64 - mean[j] * mean[j];
            let se = (var / trials as f64).sqrt();
            assert!(
                (mean[j] - want[j]).abs() < 3.0 * se + 1e-6,
                "coord {j}: got {} want {}",
                mean[j],
                want[j]
            );
        }
    }

    #[test]
    fn reports_single_evaluation_and_name() {
        let model = NoisyScaleModel::new();
        let params = model.init_params();
        let g = sgvb_gradient(&model, &params, &mut RngStream::new(13, 0)).unwrap();
        assert_eq!(g.evaluations_used, 1);
        assert_eq!(g.estimator_name, "sgvb");
        assert_eq!(g.grad.len(), 2);
    }

    #[test]
    fn deterministic_given_stream_state() {
        let model = NoisyScaleModel::new();
        let params = model.init_params();
        let mut r1 = RngStream::new(14, 0);
        let mut r2 = r1.clone();
        assert_eq!(
            sgvb_gradient(&model, &params, &mut r1).unwrap(),
            sgvb_gradient(&model, &params, &mut r2).unwrap()
        );
    }
}
