//! Three-component Gaussian mixture with an amortized categorical posterior.
//!
//! Data: 2-d points whose coordinates are drawn independently from the same
//! mixture component, so the true label is shared by both coordinates. The
//! mixture weights are uniform (1/3 each) and the component parameters are
//! fixed, well-separated constants.
//!
//! The variational posterior over the per-point component label is amortized
//! by a linear map: logits(x) = W x + b with W in R^{3x2} (parameter slice
//! "weights", row-major) and b in R^3 (slice "bias"), followed by a softmax.
//!
//! The black-box ELBO draws one label per point from q(c | x) and averages
//! the per-point integrand ln p(x, c) - ln q(c | x) over the dataset, so its
//! scale is per-point and independent of the dataset size.

use crate::model::{ElboEstimate, Model, ModelError, ensure_layout};
use crate::params::{ParamLayout, ParamVector};
use crate::rng::RngStream;
use crate::stats::{Gaussian1D, categorical_sample, softmax};
use std::sync::Arc;

/// (mean, std_dev) of each mixture component; both coordinates of a point
/// use the same component.
pub const COMPONENTS: [(f64, f64); 3] = [(-1.0, 0.5), (3.0, 0.25), (-5.0, 0.45)];

pub const N_COMPONENTS: usize = 3;
pub const POINT_DIM: usize = 2;

/// All 6 label relabelings of 3 components.
const PERMUTATIONS: [[usize; 3]; 6] =
    [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmmPoint {
    pub x: [f64; POINT_DIM],
    pub true_label: usize,
}

/// Draws `n_per_component` points from each component, in label order
/// (all label-0 points first, then label 1, then label 2).
pub fn generate_dataset(n_per_component: usize, rng: &mut RngStream) -> Vec<GmmPoint> {
    let mut points = Vec::with_capacity(n_per_component * N_COMPONENTS);
    for (label, &(mean, std_dev)) in COMPONENTS.iter().enumerate() {
        let dist = Gaussian1D::new(mean, std_dev).expect("constant std");
        for _ in 0..n_per_component {
            points.push(GmmPoint { x: [dist.sample(rng), dist.sample(rng)], true_label: label });
        }
    }
    points
}

/// Serializes a dataset as `x1,x2,true_label` CSV rows.
pub fn dataset_to_csv(points: &[GmmPoint]) -> String {
    let mut out = String::from("x1,x2,true_label\n");
    for p in points {
        out.push_str(&format!("{:.17e},{:.17e},{}\n", p.x[0], p.x[1], p.true_label));
    }
    out
}

#[derive(Debug, Clone)]
pub struct GmmModel {
    points: Vec<GmmPoint>,
    layout: Arc<ParamLayout>,
}

impl GmmModel {
    pub fn new(points: Vec<GmmPoint>) -> Self {
        assert!(!points.is_empty(), "GmmModel needs a non-empty dataset");
        Self {
            points,
            layout: ParamLayout::builder()
                .slice("weights", N_COMPONENTS * POINT_DIM)
                .slice("bias", N_COMPONENTS)
                .build(),
        }
    }

    pub fn points(&self) -> &[GmmPoint] {
        &self.points
    }

    /// Zero weights and biases: the amortized posterior starts uniform.
    pub fn init_params(&self) -> ParamVector {
        ParamVector::zeros(Arc::clone(&self.layout))
    }

    /// logits_c = sum_d W[c][d] x_d + b_c, with W row-major in "weights".
    pub fn logits(&self, params: &ParamVector, x: &[f64; POINT_DIM]) -> [f64; N_COMPONENTS] {
        let (w_start, w_len) = params.layout().slice("weights").expect("layout");
        let (b_start, _) = params.layout().slice("bias").expect("layout");
        debug_assert_eq!(w_len, N_COMPONENTS * POINT_DIM);
        let v = params.values();
        let mut logits = [0.0; N_COMPONENTS];
        for (c, logit) in logits.iter_mut().enumerate() {
            let row = &v[w_start + c * POINT_DIM..w_start + (c + 1) * POINT_DIM];
            *logit = row[0] * x[0] + row[1] * x[1] + v[b_start + c];
        }
        logits
    }

    /// q(c | x): softmax of the logits.
    pub fn posterior_probs(
        &self,
        params: &ParamVector,
        x: &[f64; POINT_DIM],
    ) -> [f64; N_COMPONENTS] {
        let probs = softmax(&self.logits(params, x));
        [probs[0], probs[1], probs[2]]
    }

    /// ln p(x, c) = ln(1/3) + sum_d ln N(x_d; mean_c, std_c).
    pub fn log_joint_component(&self, x: &[f64; POINT_DIM], c: usize) -> f64 {
        let (mean, std_dev) = COMPONENTS[c];
        let dist = Gaussian1D::new(mean, std_dev).expect("constant std");
        (1.0 / N_COMPONENTS as f64).ln() + dist.log_pdf(x[0]) + dist.log_pdf(x[1])
    }

    /// Hard assignment: argmax_c q(c | x), ties resolved to the lowest index.
    pub fn assign(&self, params: &ParamVector, x: &[f64; POINT_DIM]) -> usize {
        let logits = self.logits(params, x);
        let mut best = 0;
        for c in 1..N_COMPONENTS {
            if logits[c] > logits[best] {
                best = c;
            }
        }
        best
    }

    /// Hard assignments for the whole dataset, in dataset order.
    pub fn assignments(&self, params: &ParamVector) -> Vec<usize> {
        self.points.iter().map(|p| self.assign(params, &p.x)).collect()
    }

    /// Clustering accuracy maximized over all relabelings of the 3
    /// components, since cluster identities are only defined up to
    /// permutation.
    pub fn adjusted_accuracy(&self, assigned: &[usize]) -> f64 {
        assert_eq!(assigned.len(), self.points.len());
        let mut best = 0usize;
        for perm in PERMUTATIONS {
            let hits = self
                .points
                .iter()
                .zip(assigned)
                .filter(|(p, a)| perm[**a] == p.true_label)
                .count();
            best = best.max(hits);
        }
        best as f64 / self.points.len() as f64
    }
}

impl Model for GmmModel {
    fn name(&self) -> &'static str {
        "gmm"
    }

    fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    /// One categorical draw per point; the per-point integrands
    /// ln p(x, c) - ln q(c | x) are averaged over the dataset.
    fn elbo(&self, params: &ParamVector, rng: &mut RngStream) -> Result<ElboEstimate, ModelError> {
        ensure_layout(self.name(), &self.layout, params)?;
        let mut total = 0.0;
        for p in &self.points {
            let probs = self.posterior_probs(params, &p.x);
            let c = categorical_sample(&probs, rng).expect("softmax output is a distribution");
            total += self.log_joint_component(&p.x, c) - probs[c].ln();
        }
        Ok(ElboEstimate {
            value: total / self.points.len() as f64,
            n_inner_samples: self.points.len(),
        })
    }
}
