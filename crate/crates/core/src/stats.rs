//! Scalar probability utilities shared by the models and estimators.
//!
//! All densities are computed and stored in log space; nothing here ever
//! exponentiates a log-density except under a max-shift (softmax,
//! log-sum-exp), so values like ln N(x; m, s) ~ -1e4 stay finite.

use crate::rng::RngStream;
use thiserror::Error;

/// ln(2*pi) / 2, the normal log-density normalizer.
pub const HALF_LN_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("standard deviation must be finite and > 0, got {0}")]
    InvalidStdDev(f64),
    #[error("empty input vector")]
    EmptyInput,
    #[error("negative probability {value} at index {index}")]
    NegativeProbability { index: usize, value: f64 },
}

pub type Result<T> = std::result::Result<T, StatsError>;

/// One-dimensional Gaussian, parameterized by mean and standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian1D {
    mean: f64,
    std_dev: f64,
}

impl Gaussian1D {
    /// Rejects non-finite or non-positive standard deviations.
    pub fn new(mean: f64, std_dev: f64) -> Result<Self> {
        if !std_dev.is_finite() || std_dev <= 0.0 {
            return Err(StatsError::InvalidStdDev(std_dev));
        }
        Ok(Self { mean, std_dev })
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn std_dev(&self) -> f64 {
        self.std_dev
    }

    pub fn variance(&self) -> f64 {
        self.std_dev * self.std_dev
    }

    /// ln N(x; mean, std_dev) = -ln(std_dev) - ln(2 pi)/2 - z^2/2.
    pub fn log_pdf(&self, x: f64) -> f64 {
        let z = (x - self.mean) / self.std_dev;
        -self.std_dev.ln() - HALF_LN_2PI - 0.5 * z * z
    }

    /// Affine map of a standard-normal draw: mean + std_dev * u.
    ///
    /// This is the single reparameterization seam: samplers, pathwise
    /// gradients, and tests that force `u` all go through it.
    pub fn from_standard(&self, u: f64) -> f64 {
        self.mean + self.std_dev * u
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        self.from_standard(rng.standard_normal())
    }
}

/// Numerically stable softmax. The maximum is subtracted before
/// exponentiation, so arbitrarily large logits are safe.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    debug_assert!(!v.is_empty(), "softmax of empty vector");
    debug_assert!(v.iter().all(|x| x.is_finite()), "softmax of non-finite logits");
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// Stable ln(sum_i exp(v_i)) via max shift. Errors on empty input.
pub fn log_sum_exp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        // All -inf (or a NaN/inf slipped in): the shift would produce NaN.
        return Ok(max);
    }
    let sum: f64 = v.iter().map(|x| (x - max).exp()).sum();
    Ok(max + sum.ln())
}

/// Inverse-CDF draw from a categorical distribution.
///
/// `p` must sum to 1 within 1e-9 (caller's obligation, checked in debug
/// builds); negative entries are rejected. Any rounding slack at the top of
/// the CDF resolves to the last index.
pub fn categorical_sample(p: &[f64], rng: &mut RngStream) -> Result<usize> {
    if p.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    for (index, &value) in p.iter().enumerate() {
        if value < 0.0 {
            return Err(StatsError::NegativeProbability { index, value });
        }
    }
    debug_assert!(
        (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9,
        "categorical probabilities must sum to 1"
    );
    let u: f64 = rng.uniform_open01();
    let mut cum = 0.0;
    for (i, &pi) in p.iter().enumerate() {
        cum += pi;
        if u < cum {
            return Ok(i);
        }
    }
    Ok(p.len() - 1)
}

/// Standard-Gumbel value of a uniform draw: -ln(-ln(u)), u in (0, 1).
pub fn gumbel_from_uniform(u: f64) -> f64 {
    debug_assert!(u > 0.0 && u < 1.0, "gumbel_from_uniform needs u in (0,1)");
    -(-u.ln()).ln()
}

/// One standard-Gumbel draw (location 0, scale 1).
pub fn gumbel_sample(rng: &mut RngStream) -> f64 {
    gumbel_from_uniform(rng.uniform_open01())
}
