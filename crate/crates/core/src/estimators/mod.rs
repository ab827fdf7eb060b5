//! ELBO gradient estimators.
//!
//! All estimators produce an ascent direction for the evidence lower bound
//! and report how many model evaluations they spent:
//!
//! * [`nes`] — the evolution-strategies estimator: mirrored Gaussian
//!   perturbations of the *parameters*, treating the single-sample ELBO as a
//!   black box. Works for any [`Model`](crate::model::Model).
//! * [`sgvb`] — the pathwise (reparameterization) estimator; needs a
//!   [`ReparamModel`](crate::model::ReparamModel).
//! * [`reinforce`] — the score-function estimator with an optional running
//!   baseline; needs a [`ScoreModel`](crate::model::ScoreModel).
//! * [`rws`] — self-normalized importance-weighted score estimator over
//!   multiple particles; needs a [`ScoreModel`](crate::model::ScoreModel).
//! * [`st_gumbel`] — straight-through Gumbel-softmax estimator for the
//!   discrete-latent mixture model.

use crate::model::ModelError;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub mod nes;
pub mod reinforce;
pub mod rws;
pub mod sgvb;
pub mod st_gumbel;

pub use nes::{NesConfig, nesvb_gradient};
pub use reinforce::{ReinforceBaseline, reinforce_gradient};
pub use rws::rws_gradient;
pub use sgvb::sgvb_gradient;
pub use st_gumbel::{StGumbelEval, st_gumbel_eval, st_gumbel_gradient};

pub type Result<T> = std::result::Result<T, EstimatorError>;

#[derive(Debug, Error)]
pub enum EstimatorError {
    /// An objective evaluation returned NaN or infinity.
    #[error("objective evaluation {index} returned a non-finite value")]
    NonFiniteObjective { index: usize },
    /// A gradient coordinate came out NaN or infinite.
    #[error("gradient coordinate {coordinate} is non-finite")]
    NonFiniteGradient { coordinate: usize },
    #[error("perturbation scale sigma must be positive and finite, got {0}")]
    InvalidSigma(f64),
    #[error("number of mirrored pairs must be at least 1, got {0}")]
    InvalidPairCount(usize),
    #[error("importance weighting needs at least 2 particles, got {0}")]
    InvalidParticleCount(usize),
    #[error("relaxation temperature must be positive and finite, got {0}")]
    InvalidTemperature(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A single stochastic gradient estimate (ascent direction on the ELBO).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientEstimate {
    pub grad: Vec<f64>,
    /// Number of model evaluations (black-box calls or hook calls) spent.
    pub evaluations_used: usize,
    pub estimator_name: &'static str,
}

impl GradientEstimate {
    /// Wraps a gradient after rejecting non-finite coordinates.
    pub fn checked(
        grad: Vec<f64>,
        evaluations_used: usize,
        estimator_name: &'static str,
    ) -> Result<Self> {
        if let Some(coordinate) = grad.iter().position(|g| !g.is_finite()) {
            return Err(EstimatorError::NonFiniteGradient { coordinate });
        }
        Ok(Self { grad, evaluations_used, estimator_name })
    }
}

/// The estimators selectable by name in experiments and on the command line.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize,
)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Nesvb,
    Sgvb,
    Reinforce,
    Rws,
    StGumbel,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 5] = [
        EstimatorKind::Nesvb,
        EstimatorKind::Sgvb,
        EstimatorKind::Reinforce,
        EstimatorKind::Rws,
        EstimatorKind::StGumbel,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            EstimatorKind::Nesvb => "nesvb",
            EstimatorKind::Sgvb => "sgvb",
            EstimatorKind::Reinforce => "reinforce",
            EstimatorKind::Rws => "rws",
            EstimatorKind::StGumbel => "st-gumbel",
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown estimator {0:?}; expected one of nesvb, sgvb, reinforce, rws, st-gumbel")]
pub struct UnknownEstimator(String);

impl FromStr for EstimatorKind {
    type Err = UnknownEstimator;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "nesvb" => Ok(EstimatorKind::Nesvb),
            "sgvb" => Ok(EstimatorKind::Sgvb),
            "reinforce" => Ok(EstimatorKind::Reinforce),
            "rws" => Ok(EstimatorKind::Rws),
            "st-gumbel" | "st_gumbel" => Ok(EstimatorKind::StGumbel),
            other => Err(UnknownEstimator(other.to_string())),
        }
    }
}
