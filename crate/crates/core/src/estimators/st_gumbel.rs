//! Straight-through Gumbel-softmax estimator for the mixture model's
//! discrete per-point latent.
//!
//! Per point, with logits l = W x + b, posterior q = softmax(l) and
//! per-component integrands A_c = ln p(x, c) - ln q_c:
//!
//! * forward (reported objective): a *hard* sample h = argmax_c(l_c + g_c)
//!   with g standard Gumbel — exactly a draw from q by the Gumbel-max
//!   trick — contributing A_h;
//! * backward: the exact gradient of the *relaxed* surrogate
//!   O = sum_c y_c A_c with y = softmax((l + g)/tau), namely
//!
//! ```text
//! dO/dl_k = (1/tau) y_k (A_k - sum_c y_c A_c) - (y_k - q_k)
//! ```
//!
//! (first term: softmax-relaxation path; second term: the integrand's own
//! dependence on ln q). Temperature tau trades bias for variance: small tau
//! approaches the hard objective's discontinuity, large tau washes the
//! relaxation toward uniform. The backward pass is chained through the
//! linear head onto the "weights"/"bias" parameter slices and averaged over
//! the dataset, matching the model's per-point-mean ELBO convention.

use crate::estimators::{EstimatorError, GradientEstimate, Result};
use crate::model::{Model, ensure_layout};
use crate::models::gmm::{GmmModel, N_COMPONENTS, POINT_DIM};
use crate::params::ParamVector;
use crate::rng::RngStream;
use crate::stats::{gumbel_sample, softmax};

#[derive(Debug, Clone, PartialEq)]
pub struct StGumbelEval {
    /// Dataset mean of the hard-sample integrands A_h.
    pub hard_value: f64,
    /// Dataset mean of the relaxed surrogate sum_c y_c A_c.
    pub relaxed_value: f64,
    /// Gradient of `relaxed_value` w.r.t. the full parameter vector.
    pub grad: Vec<f64>,
}

/// Evaluates forward and backward passes at caller-supplied Gumbel noise
/// (one triple per dataset point).
pub fn st_gumbel_eval(
    model: &GmmModel,
    params: &ParamVector,
    gumbels: &[[f64; N_COMPONENTS]],
    tau: f64,
) -> Result<StGumbelEval> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(EstimatorError::InvalidTemperature(tau));
    }
    ensure_layout(model.name(), model.layout(), params)?;
    let points = model.points();
    assert_eq!(gumbels.len(), points.len(), "one Gumbel triple per dataset point");

    let (w_start, _) = params.layout().slice("weights").expect("gmm layout");
    let (b_start, _) = params.layout().slice("bias").expect("gmm layout");
    let n = points.len() as f64;

    let mut hard_total = 0.0;
    let mut relaxed_total = 0.0;
    let mut grad = vec![0.0; params.len()];
    for (index, (point, g)) in points.iter().zip(gumbels).enumerate() {
        let logits = model.logits(params, &point.x);
        let q = softmax(&logits);
        let a: Vec<f64> = (0..N_COMPONENTS)
            .map(|c| model.log_joint_component(&point.x, c) - q[c].ln())
            .collect();
        if a.iter().any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFiniteObjective { index });
        }

        let perturbed: Vec<f64> =
            logits.iter().zip(g).map(|(l, gi)| (l + gi) / tau).collect();
        let y = softmax(&perturbed);

        let mut hard = 0;
        for c in 1..N_COMPONENTS {
            if logits[c] + g[c] > logits[hard] + g[hard] {
                hard = c;
            }
        }
        hard_total += a[hard];

        let relaxed: f64 = y.iter().zip(&a).map(|(yc, ac)| yc * ac).sum();
        relaxed_total += relaxed;

        for k in 0..N_COMPONENTS {
            let dl = y[k] * (a[k] - relaxed) / tau - (y[k] - q[k]);
            for d in 0..POINT_DIM {
                grad[w_start + k * POINT_DIM + d] += dl * point.x[d] / n;
            }
            grad[b_start + k] += dl / n;
        }
    }

    Ok(StGumbelEval { hard_value: hard_total / n, relaxed_value: relaxed_total / n, grad })
}

/// Draws one Gumbel triple per point from `rng` (sequentially, in dataset
/// order) and returns the straight-through gradient estimate.
pub fn st_gumbel_gradient(
    model: &GmmModel,
    params: &ParamVector,
    tau: f64,
    rng: &mut RngStream,
) -> Result<GradientEstimate> {
    let gumbels: Vec<[f64; N_COMPONENTS]> = (0..model.points().len())
        .map(|_| std::array::from_fn(|_| gumbel_sample(rng)))
        .collect();
    let eval = st_gumbel_eval(model, params, &gumbels, tau)?;
    GradientEstimate::checked(eval.grad, model.points().len(), "st-gumbel")
}
