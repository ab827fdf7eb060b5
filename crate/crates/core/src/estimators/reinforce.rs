//! Score-function (likelihood-ratio) gradient estimator.
//!
//! Uses the identity grad E_q[f(z)] = E_q[f(z) grad ln q(z)] applied to the
//! ELBO integrand f(z) = ln p(x, z) - ln q(z); the extra term from
//! differentiating the integrand's own ln q has zero expectation, so
//!
//! ```text
//! g_hat = (ln p(x, z) - ln q(z) - b) * grad ln q(z),   z ~ q
//! ```
//!
//! is unbiased for any baseline b that does not depend on the current draw.
//! [`ReinforceBaseline`] tracks the running mean of past integrand values
//! and is always applied *before* being updated with the current value,
//! preserving unbiasedness.

use crate::estimators::{EstimatorError, GradientEstimate, Result};
use crate::model::ScoreModel;
use crate::params::ParamVector;
use crate::rng::RngStream;

/// Running mean of previously seen ELBO integrand values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReinforceBaseline {
    mean: f64,
    count: usize,
}

impl ReinforceBaseline {
    pub fn new() -> Self {
        Self::default()
    }

    /// Current baseline: 0 until the first update.
    pub fn value(&self) -> f64 {
        self.mean
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn update(&mut self, observed: f64) {
        self.count += 1;
        self.mean += (observed - self.mean) / self.count as f64;
    }
}

pub fn reinforce_gradient<M: ScoreModel + ?Sized>(
    model: &M,
    params: &ParamVector,
    baseline: Option<&mut ReinforceBaseline>,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let z = model.sample_latent(params, rng)?;
    let integrand = model.log_joint(z) - model.log_q(params, z)?;
    if !integrand.is_finite() {
        return Err(EstimatorError::NonFiniteObjective { index: 0 });
    }
    let b = baseline.as_ref().map_or(0.0, |b| b.value());
    let grad: Vec<f64> =
        model.score(params, z)?.into_iter().map(|s| (integrand - b) * s).collect();
    if let Some(b) = baseline {
        b.update(integrand);
    }
    GradientEstimate::checked(grad, 1, "reinforce")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::NoisyScaleModel;

    fn params_at(model: &NoisyScaleModel, theta: f64, log_var: f64) -> ParamVector {
        let mut p = model.init_params();
        p.set_scalar("mean", theta).unwrap();
        p.set_scalar("log_var", log_var).unwrap();
        p
    }

    /// Exact ELBO gradient of the conjugate model.
    fn exact_gradient(model: &NoisyScaleModel, theta: f64, log_var: f64) -> [f64; 2] {
        let post = model.exact_posterior();
        [
            -(theta - post.mean()) / post.variance(),
            0.5 - log_var.exp() / (2.0 * post.variance()),
        ]
    }

    fn mean_and_var(
        model: &NoisyScaleModel,
        params: &ParamVector,
        baseline: bool,
        trials: usize,
        rng: &mut RngStream,
    ) -> ([f64; 2], [f64; 2]) {
        let mut bl = ReinforceBaseline::new();
        let mut mean = [0.0; 2];
        let mut m2 = [0.0; 2];
        for _ in 0..trials {
            let opt = baseline.then_some(&mut bl);
            let g = reinforce_gradient(model, params, opt, rng).unwrap().grad;
            for j in 0..2 {
                mean[j] += g[j];
                m2[j] += g[j] * g[j];
            }
        }
        for j in 0..2 {
            mean[j] /= trials as f64;
            m2[j] = m2[j] / trials as f64 - mean[j] * mean[j];
        }
        (mean, m2)
    }

    #[test]
    fn unbiased_with_and_without_baseline() {
        let model = NoisyScaleModel::new();
        let (theta, log_var) = (8.0, 0.2);
        let params = params_at(&model, theta, log_var);
        let want = exact_gradient(&model, theta, log_var);
        for baseline in [false, true] {
            let mut rng = RngStream::new(15, 0);
            let trials = 400_000;
            let (mean, var) = mean_and_var(&model, &params, baseline, trials, &mut rng);
            for j in 0..2 {
                let se = (var[j] / trials as f64).sqrt();
                assert!(
                    (mean[j] - want[j]).abs() < 3.0 * se + 1e-6,
                    "baseline={baseline} coord {j}: got {} want {}",
                    mean[j],
                    want[j]
                );
            }
        }
    }

    #[test]
    fn baseline_reduces_variance_away_from_the_optimum() {
        // At theta = 6 the integrand has a large magnitude, so centering it
        // with a running mean removes most of the score-scaling noise.
        let model = NoisyScaleModel::new();
        let params = params_at(&model, 6.0, 0.0);
        let trials = 20_000;
        let (_, var_plain) =
            mean_and_var(&model, &params, false, trials, &mut RngStream::new(16, 0));
        let (_, var_base) =
            mean_and_var(&model, &params, true, trials, &mut RngStream::new(16, 0));
        let plain: f64 = var_plain.iter().sum();
        let based: f64 = var_base.iter().sum();
        assert!(based < plain / 2.0, "baseline {based} vs plain {plain}");
    }

    #[test]
    fn baseline_lags_one_observation() {
        let mut b = ReinforceBaseline::new();
        assert_eq!(b.value(), 0.0);
        b.update(2.0);
        assert_eq!(b.value(), 2.0);
        b.update(4.0);
        assert_eq!(b.value(), 3.0);
        assert_eq!(b.count(), 2);
    }

    #[test]
    fn score_estimates_are_noisier_than_pathwise_ones() {
        let model = NoisyScaleModel::new();
        let params = params_at(&model, 8.5, 0.0);
        let trials = 20_000;
        let (_, var_score) =
            mean_and_var(&model, &params, false, trials, &mut RngStream::new(17, 0));

        let mut rng = RngStream::new(17, 1);
        let mut mean = [0.0; 2];
        let mut m2 = [0.0; 2];
        for _ in 0..trials {
            let g = crate::estimators::sgvb_gradient(&model, &params, &mut rng).unwrap().grad;
            for j in 0..2 {
                mean[j] += g[j];
                m2[j] += g[j] * g[j];
            }
        }
        for j in 0..2 {
            mean[j] /= trials as f64;
            let var_path = m2[j] / trials as f64 - mean[j] * mean[j];
            assert!(
                var_score[j] > var_path,
                "coord {j}: score {} should exceed pathwise {var_path}",
                var_score[j]
            );
        }
    }

    #[test]
    fn deterministic_given_stream_state() {
        let model = NoisyScaleModel::new();
        let params = params_at(&model, 8.5, 0.0);
        let mut r1 = RngStream::new(18, 0);
        let mut r2 = r1.clone();
        assert_eq!(
            reinforce_gradient(&model, &params, None, &mut r1).unwrap(),
            reinforce_gradient(&model, &params, None, &mut r2).unwrap()
        );
    }
}
