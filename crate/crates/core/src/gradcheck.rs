//! Numerical gradient checking.
//!
//! [`finite_diff`] is a plain central-difference stencil with a relative
//! step, used throughout the test suites as the independent reference for
//! analytic gradients. [`smoothed_objective`] Monte-Carlo-evaluates the
//! Gaussian-smoothed ELBO E_eps[F(p + sigma eps)] — the exact objective the
//! evolution-strategies estimator targets — so the two together can verify
//! that estimator end to end: average many gradient estimates, then compare
//! against finite differences of this function under frozen noise.

use crate::model::{Model, ModelError, elbo_mean};
use crate::params::ParamVector;
use crate::rng::RngStream;
use thiserror::Error;

/// Default relative step for central differences: large enough to dominate
/// f64 cancellation on O(1) values, small enough for O(step^2) truncation
/// to stay below typical tolerances.
pub const DEFAULT_STEP: f64 = 1e-5;

#[derive(Debug, Error)]
pub enum GradCheckError {
    #[error("objective returned a non-finite value while probing coordinate {coordinate}")]
    NonFiniteValue { coordinate: usize },
}

/// Central finite differences of `f` at `at`, with per-coordinate step
/// `step * max(1, |x_k|)`.
///
/// `f` may carry mutable state (e.g. cloned noise streams); it is invoked
/// exactly twice per coordinate, plus-side first.
pub fn finite_diff(
    mut f: impl FnMut(&[f64]) -> f64,
    at: &[f64],
    step: f64,
) -> Result<Vec<f64>, GradCheckError> {
    assert!(step.is_finite() && step > 0.0, "step must be positive and finite");
    let mut grad = Vec::with_capacity(at.len());
    let mut point = at.to_vec();
    for k in 0..at.len() {
        let h = step * at[k].abs().max(1.0);
        point[k] = at[k] + h;
        let plus = f(&point);
        point[k] = at[k] - h;
        let minus = f(&point);
        point[k] = at[k];
        if !plus.is_finite() || !minus.is_finite() {
            return Err(GradCheckError::NonFiniteValue { coordinate: k });
        }
        grad.push((plus - minus) / (2.0 * h));
    }
    Ok(grad)
}

/// Monte-Carlo estimate of the smoothed objective
/// E_eps[ E_inner[ F(p + sigma eps) ] ] with `n_outer` perturbation draws
/// and `n_inner` black-box evaluations per perturbation (each on its own
/// split stream).
pub fn smoothed_objective<M: Model + ?Sized>(
    model: &M,
    params: &ParamVector,
    sigma: f64,
    n_outer: usize,
    n_inner: usize,
    rng: &mut RngStream,
) -> Result<f64, ModelError> {
    assert!(sigma.is_finite() && sigma >= 0.0, "sigma must be non-negative");
    assert!(n_outer >= 1 && n_inner >= 1);
    let dim = params.len();
    let mut total = 0.0;
    for _ in 0..n_outer {
        let eps: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
        let mut inner = rng.split();
        total += elbo_mean(model, &params.perturbed(sigma, &eps), &mut inner, n_inner)?.value;
    }
    Ok(total / n_outer as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ElboEstimate;
    use crate::params::ParamLayout;
    use std::sync::Arc;

    struct QuadModel {
        layout: Arc<ParamLayout>,
    }

    impl QuadModel {
        fn new(dim: usize) -> Self {
            Self { layout: ParamLayout::builder().slice("p", dim).build() }
        }
    }

    impl Model for QuadModel {
        fn name(&self) -> &'static str {
            "quad"
        }
        fn layout(&self) -> &Arc<ParamLayout> {
            &self.layout
        }
        fn elbo(
            &self,
            params: &ParamVector,
            _rng: &mut RngStream,
        ) -> Result<ElboEstimate, ModelError> {
            Ok(ElboEstimate {
                value: -params.values().iter().map(|x| x * x).sum::<f64>(),
                n_inner_samples: 1,
            })
        }
    }

    #[test]
    fn recovers_polynomial_gradients_to_high_accuracy() {
        // f(x) = x0^3 + 2 x0 x1^2 - x2, grad at (1, 2, 3) = (11, 8, -1).
        let f = |x: &[f64]| x[0].powi(3) + 2.0 * x[0] * x[1] * x[1] - x[2];
        let grad = finite_diff(f, &[1.0, 2.0, 3.0], DEFAULT_STEP).unwrap();
        let want = [11.0, 8.0, -1.0];
        for (g, w) in grad.iter().zip(want) {
            assert!((g - w).abs() / w.abs() < 1e-8, "{g} vs {w}");
        }
    }

    #[test]
    fn relative_step_handles_large_coordinates() {
        // With an absolute step of 1e-5, f(x) = x^2 at x = 1e8 would lose
        // all precision; the relative step keeps the estimate tight.
        let grad = finite_diff(|x| x[0] * x[0], &[1e8], DEFAULT_STEP).unwrap();
        assert!((grad[0] - 2e8).abs() / 2e8 < 1e-6, "{}", grad[0]);
    }

    #[test]
    fn reports_the_probed_coordinate_on_non_finite_values() {
        let f = |x: &[f64]| if x[1] > 1.0 { f64::NAN } else { x[0] + x[1] };
        let err = finite_diff(f, &[0.0, 1.0], DEFAULT_STEP).unwrap_err();
        assert!(matches!(err, GradCheckError::NonFiniteValue { coordinate: 1 }));
    }

    #[test]
    fn smoothed_quadratic_matches_closed_form() {
        // E_eps[-|p + sigma eps|^2] = -|p|^2 - sigma^2 d.
        let model = QuadModel::new(2);
        let params =
            ParamVector::from_values(Arc::clone(model.layout()), vec![1.0, -1.0]).unwrap();
        let sigma = 0.5;
        let mut rng = RngStream::new(60, 0);
        let got = smoothed_objective(&model, &params, sigma, 200_000, 1, &mut rng).unwrap();
        let want = -2.0 - sigma * sigma * 2.0;
        assert!((got - want).abs() < 0.02, "{got} vs {want}");
    }

    #[test]
    fn vanishing_sigma_recovers_the_plain_objective() {
        let model = QuadModel::new(2);
        let params =
            ParamVector::from_values(Arc::clone(model.layout()), vec![0.7, 0.3]).unwrap();
        let mut rng = RngStream::new(61, 0);
        let got = smoothed_objective(&model, &params, 1e-8, 100, 1, &mut rng).unwrap();
        assert!((got - (-0.58)).abs() < 1e-6, "{got}");
    }

    #[test]
    fn smoothed_objective_is_deterministic_given_stream_state() {
        let model = crate::models::NoisyScaleModel::new();
        let params = model.init_params();
        let mut r1 = RngStream::new(62, 0);
        let mut r2 = r1.clone();
        let a = smoothed_objective(&model, &params, 0.1, 50, 2, &mut r1).unwrap();
        let b = smoothed_objective(&model, &params, 0.1, 50, 2, &mut r2).unwrap();
        assert_eq!(a, b);
    }
}
