//! Stochastic variational inference with an evolution-strategies ELBO
//! gradient estimator and classic baselines.
//!
//! The crate optimizes variational objectives of the form
//! `E_q[ln p(x, z) - ln q(z)]` (the evidence lower bound) by stochastic
//! gradient ascent. Its centerpiece treats the single-sample ELBO evaluation
//! as a black box `F(params)` and estimates the gradient of the Gaussian
//! smoothing `E_eps[F(params + sigma * eps)]` from mirrored parameter
//! perturbations — no differentiation of the model is required, only
//! evaluations. Classic estimators (reparameterization, score-function,
//! importance-weighted score, and a straight-through Gumbel-softmax
//! relaxation for discrete latents) are implemented against the same model
//! interface for head-to-head comparisons.
//!
//! Module map:
//!
//! * [`rng`] — counter-based, splittable random streams; every result in the
//!   crate is reproducible from a `(seed, stream_id)` pair.
//! * [`stats`] — Gaussian/categorical/Gumbel primitives and log-space
//!   helpers.
//! * [`params`] — named, contiguously-packed parameter vectors.
//! * [`model`] — the `Model` trait (black-box ELBO) plus opt-in gradient
//!   hooks for models that expose more structure.
//! * [`models`] — the two concrete problems: a conjugate noisy-scale model
//!   and a Gaussian mixture with discrete latents.
//! * [`estimators`] — the gradient estimators.
//! * [`optimizer`] — SGD and Adam (ascent convention) with optional
//!   gradient clipping.
//! * [`gradcheck`] — central finite differences and the smoothed objective,
//!   for verifying gradients.
//! * [`verify`] — a self-check suite wiring estimators against finite
//!   differences and Monte-Carlo ground truth.
//! * [`experiments`] — reproducible optimization runs and variance probes
//!   with CSV/JSON outputs.

pub mod estimators;
pub mod experiments;
pub mod gradcheck;
pub mod model;
pub mod models;
pub mod optimizer;
pub mod params;
pub mod rng;
pub mod stats;
pub mod verify;

pub use estimators::{EstimatorKind, GradientEstimate};
pub use model::{ElboEstimate, Model, ModelError, ReparamModel, ScoreModel};
pub use params::{ParamLayout, ParamVector};
pub use rng::RngStream;
