//! Conjugate scalar-location model with one noisy observation.
//!
//! Generative story: latent location c ~ N(8.5, 1.0); observation
//! y ~ N(c, 0.75), with y = 9.5 observed. The variational family is a
//! Gaussian N(theta, phi) over c, optimized through the parameter slices
//! ("mean", "log_var") with phi = exp(log_var / 2).
//!
//! Prior and likelihood are conjugate, so the exact posterior and the log
//! marginal ln p(y) are available in closed form; this makes the model the
//! calibration target for every gradient estimator in the crate.
//!
//! The deterministic-mean variant replaces the posterior draw inside `elbo`
//! with its mean: the integrand becomes ln p(y, theta) - ln q(theta), whose
//! last term is +ln(phi sqrt(2 pi)), strictly increasing in log_var with
//! slope 1/2 everywhere. Maximizing it therefore drives log_var to +inf;
//! the variant exists to demonstrate exactly that failure mode for black-box
//! perturbation estimators. Estimators that are *defined* by how they sample
//! (the reparameterized and importance-weighted gradient hooks below) keep
//! sampling; the flag changes only the black-box `elbo` evaluation.

use crate::model::{ElboEstimate, Model, ModelError, ReparamModel, ScoreModel, ensure_layout};
use crate::params::{ParamLayout, ParamVector};
use crate::rng::RngStream;
use crate::stats::Gaussian1D;
use std::sync::Arc;

pub const PRIOR_MEAN: f64 = 8.5;
pub const PRIOR_STD: f64 = 1.0;
pub const LIKELIHOOD_STD: f64 = 0.75;
pub const OBSERVATION: f64 = 9.5;

#[derive(Debug, Clone)]
pub struct NoisyScaleModel {
    prior: Gaussian1D,
    likelihood_std: f64,
    observation: f64,
    deterministic_mean: bool,
    layout: Arc<ParamLayout>,
}

impl Default for NoisyScaleModel {
    fn default() -> Self {
        Self::new()
    }
}

impl NoisyScaleModel {
    pub fn new() -> Self {
        Self {
            prior: Gaussian1D::new(PRIOR_MEAN, PRIOR_STD).expect("prior constants"),
            likelihood_std: LIKELIHOOD_STD,
            observation: OBSERVATION,
            deterministic_mean: false,
            layout: ParamLayout::builder().slice("mean", 1).slice("log_var", 1).build(),
        }
    }

    /// Variant whose `elbo` evaluates the integrand at the posterior mean
    /// instead of at a posterior draw. See the module docs.
    pub fn deterministic_mean() -> Self {
        Self { deterministic_mean: true, ..Self::new() }
    }

    pub fn is_deterministic_mean(&self) -> bool {
        self.deterministic_mean
    }

    /// Standard initialization: theta at the prior mean, log_var = 0.
    pub fn init_params(&self) -> ParamVector {
        let mut p = ParamVector::zeros(Arc::clone(&self.layout));
        p.set_scalar("mean", PRIOR_MEAN).expect("layout");
        p
    }

    /// The variational distribution N(theta, exp(log_var / 2)).
    pub fn q_dist(&self, params: &ParamVector) -> Result<Gaussian1D, ModelError> {
        ensure_layout(self.name(), &self.layout, params)?;
        let theta = params.scalar("mean").expect("layout");
        let phi = (0.5 * params.scalar("log_var").expect("layout")).exp();
        Gaussian1D::new(theta, phi).map_err(|_| ModelError::DegenerateParams {
            model: self.name(),
            detail: format!("mean {theta}, scale {phi}"),
        })
    }

    /// ln p(y, c) = ln N(y; c, likelihood_std) + ln N(c; prior).
    pub fn log_joint_at(&self, c: f64) -> f64 {
        let likelihood = Gaussian1D::new(c, self.likelihood_std).expect("constant std");
        likelihood.log_pdf(self.observation) + self.prior.log_pdf(c)
    }

    /// Exact posterior over c, from conjugate precision weighting.
    pub fn exact_posterior(&self) -> Gaussian1D {
        let prior_prec = 1.0 / self.prior.variance();
        let like_prec = 1.0 / (self.likelihood_std * self.likelihood_std);
        let prec = prior_prec + like_prec;
        let mean = (self.prior.mean() * prior_prec + self.observation * like_prec) / prec;
        Gaussian1D::new(mean, prec.sqrt().recip()).expect("positive precision")
    }

    /// Exact log marginal ln p(y) = ln N(y; prior mean, sqrt(prior var +
    /// likelihood var)). This is the ELBO's least upper bound.
    pub fn log_marginal(&self) -> f64 {
        let total_std =
            (self.prior.variance() + self.likelihood_std * self.likelihood_std).sqrt();
        Gaussian1D::new(self.prior.mean(), total_std)
            .expect("positive std")
            .log_pdf(self.observation)
    }

    /// Single-sample stochastic ELBO: draw c ~ q, evaluate
    /// ln p(y, c) - ln q(c).
    pub fn stochastic_elbo(
        &self,
        params: &ParamVector,
        rng: &mut RngStream,
    ) -> Result<ElboEstimate, ModelError> {
        let q = self.q_dist(params)?;
        let c = q.sample(rng);
        Ok(ElboEstimate { value: self.log_joint_at(c) - q.log_pdf(c), n_inner_samples: 1 })
    }

    /// Deterministic-mean objective: the ELBO integrand evaluated at
    /// c = theta, i.e. ln p(y, theta) - ln q(theta) with
    /// -ln q(theta) = log_var/2 + ln(2 pi)/2.
    pub fn deterministic_elbo(&self, params: &ParamVector) -> Result<ElboEstimate, ModelError> {
        let q = self.q_dist(params)?;
        let theta = q.mean();
        Ok(ElboEstimate { value: self.log_joint_at(theta) - q.log_pdf(theta), n_inner_samples: 1 })
    }

    /// Pathwise (reparameterized) single-sample ELBO gradient at a forced
    /// standard-normal draw `u`. Writing c = theta + phi u and
    /// j'(c) = d/dc ln p(y, c) = (y - c)/likelihood_var + (prior_mean - c)/prior_var,
    /// the total derivative of ln p(y, c(u)) - ln q(c(u); theta, log_var) is
    ///
    /// ```text
    /// d/d theta   = j'(c)
    /// d/d log_var = j'(c) (c - theta)/2 + 1/2
    /// ```
    ///
    /// (the density's direct parameter dependence cancels against the path
    /// term in the theta coordinate and contributes the constant +1/2 in the
    /// log_var coordinate; see docs/gradients.md).
    pub fn pathwise_gradient_at(
        &self,
        params: &ParamVector,
        u: f64,
    ) -> Result<(f64, Vec<f64>), ModelError> {
        let q = self.q_dist(params)?;
        let c = q.from_standard(u);
        let j_prime = (self.observation - c) / (self.likelihood_std * self.likelihood_std)
            + (self.prior.mean() - c) / self.prior.variance();
        let value = self.log_joint_at(c) - q.log_pdf(c);
        let grad = vec![j_prime, j_prime * (c - q.mean()) / 2.0 + 0.5];
        Ok((value, grad))
    }

    /// Score function at a forced latent: gradient of ln q(c; theta,
    /// log_var) w.r.t. (theta, log_var).
    pub fn score_at(&self, params: &ParamVector, c: f64) -> Result<Vec<f64>, ModelError> {
        let q = self.q_dist(params)?;
        let centered = c - q.mean();
        let var = q.variance();
        Ok(vec![centered / var, -0.5 + centered * centered / (2.0 * var)])
    }
}

impl Model for NoisyScaleModel {
    fn name(&self) -> &'static str {
        if self.deterministic_mean { "noisy-scale (deterministic mean)" } else { "noisy-scale" }
    }

    fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    fn elbo(&self, params: &ParamVector, rng: &mut RngStream) -> Result<ElboEstimate, ModelError> {
        if self.deterministic_mean {
            self.deterministic_elbo(params)
        } else {
            self.stochastic_elbo(params, rng)
        }
    }
}

impl ReparamModel for NoisyScaleModel {
    fn pathwise_gradient(
        &self,
        params: &ParamVector,
        rng: &mut RngStream,
    ) -> Result<(f64, Vec<f64>), ModelError> {
        let u = rng.standard_normal();
        self.pathwise_gradient_at(params, u)
    }
}

impl ScoreModel for NoisyScaleModel {
    fn sample_latent(&self, params: &ParamVector, rng: &mut RngStream) -> Result<f64, ModelError> {
        Ok(self.q_dist(params)?.sample(rng))
    }

    fn log_joint(&self, z: f64) -> f64 {
        self.log_joint_at(z)
    }

    fn log_q(&self, params: &ParamVector, z: f64) -> Result<f64, ModelError> {
        Ok(self.q_dist(params)?.log_pdf(z))
    }

    fn score(&self, params: &ParamVector, z: f64) -> Result<Vec<f64>, ModelError> {
        self.score_at(params, z)
    }
}
