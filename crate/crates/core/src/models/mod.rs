//! Concrete inference problems used throughout the crate.
//!
//! * [`noisy_scale`] — a conjugate scalar-location model whose exact
//!   posterior and log marginal are known in closed form; the calibration
//!   target for the gradient estimators.
//! * [`gmm`] — a three-component Gaussian mixture with a discrete per-point
//!   latent and an amortized linear-softmax posterior; the test bed for
//!   discrete-latent estimators.

pub mod gmm;
pub mod noisy_scale;

pub use gmm::{GmmModel, GmmPoint, generate_dataset};
pub use noisy_scale::NoisyScaleModel;
