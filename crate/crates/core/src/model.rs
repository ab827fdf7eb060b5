//! The model abstraction every estimator works against.
//!
//! A [`Model`] owns a generative story plus a variational family and exposes
//! one thing: a single-sample ELBO evaluation
//!
//! ```text
//! elbo(params, rng) ~ E_q[ ln p(x, z) - ln q(z; params) ]
//! ```
//!
//! which is all a black-box perturbation estimator needs. Models that also
//! admit analytic gradients advertise them through the optional hook traits
//! ([`ReparamModel`], [`ScoreModel`]); the estimators stay thin and the
//! model-specific math lives next to the model it belongs to.

use crate::params::{ParamLayout, ParamVector};
use crate::rng::RngStream;
use std::sync::Arc;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("{model}: parameter layout mismatch (expected [{expected}], got [{got}])")]
    LayoutMismatch { model: &'static str, expected: String, got: String },
    /// Parameters that are numerically finite but map to an unusable
    /// variational distribution (e.g. a log-variance so large that the
    /// scale overflows to infinity).
    #[error("{model}: parameters give a degenerate variational distribution ({detail})")]
    DegenerateParams { model: &'static str, detail: String },
}

/// A single Monte Carlo ELBO evaluation (or an average of several).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElboEstimate {
    pub value: f64,
    /// Number of inner posterior draws averaged into `value`.
    pub n_inner_samples: usize,
}

pub trait Model: Sync {
    fn name(&self) -> &'static str;

    fn layout(&self) -> &Arc<ParamLayout>;

    /// One single-sample ELBO evaluation at `params`.
    fn elbo(&self, params: &ParamVector, rng: &mut RngStream) -> Result<ElboEstimate, ModelError>;
}

/// Models with an analytic reparameterized (pathwise) ELBO gradient.
pub trait ReparamModel: Model {
    /// Draw the reparameterization noise, return the single-sample ELBO
    /// value and the total gradient of that sample w.r.t. `params`
    /// (including the variational density's direct parameter dependence).
    fn pathwise_gradient(
        &self,
        params: &ParamVector,
        rng: &mut RngStream,
    ) -> Result<(f64, Vec<f64>), ModelError>;
}

/// Models with a scalar latent and an analytic score function, as needed by
/// likelihood-ratio and importance-weighted estimators.
pub trait ScoreModel: Model {
    /// Draw z ~ q(z; params).
    fn sample_latent(&self, params: &ParamVector, rng: &mut RngStream) -> Result<f64, ModelError>;

    /// ln p(x, z) for the fixed observation x.
    fn log_joint(&self, z: f64) -> f64;

    /// ln q(z; params).
    fn log_q(&self, params: &ParamVector, z: f64) -> Result<f64, ModelError>;

    /// Score function: gradient of ln q(z; params) w.r.t. params.
    fn score(&self, params: &ParamVector, z: f64) -> Result<Vec<f64>, ModelError>;
}

/// Check that `params` uses the model's layout; every model entry point is
/// expected to call this before touching values.
pub fn ensure_layout(
    model: &'static str,
    expected: &Arc<ParamLayout>,
    params: &ParamVector,
) -> Result<(), ModelError> {
    if params.layout().as_ref() == expected.as_ref() {
        return Ok(());
    }
    let describe = |l: &ParamLayout| {
        l.entries()
            .map(|(n, _, len)| format!("{n}:{len}"))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Err(ModelError::LayoutMismatch {
        model,
        expected: describe(expected),
        got: describe(params.layout()),
    })
}

/// Mean of `n` independent single-sample ELBO evaluations. `n` must be >= 1.
pub fn elbo_mean<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    rng: &mut RngStream,
    n: usize,
) -> Result<ElboEstimate, ModelError> {
    assert!(n >= 1, "elbo_mean needs at least one sample");
    let mut acc = 0.0;
    let mut inner = 0;
    for _ in 0..n {
        let e = model.elbo(params, rng)?;
        acc += e.value;
        inner += e.n_inner_samples;
    }
    Ok(ElboEstimate { value: acc / n as f64, n_inner_samples: inner })
}
