//! Self-check suite: estimator gradients against finite differences and
//! Monte-Carlo ground truth.
//!
//! Every check reduces to a single scalar `observed` compared against a
//! `threshold` (pass iff `observed <= threshold`), so reports read
//! uniformly regardless of what was measured:
//!
//! * finite-difference checks report the worst per-coordinate ratio
//!   |grad - fd| / tol with tol = max(1e-5, 1e-3 |grad|), threshold 1;
//! * unbiasedness checks report the worst standardized deviation
//!   (|mean - target| - slop) / (3 SE), threshold 1;
//! * direction checks report a shortfall that is negative when the
//!   inequality holds with margin, threshold 0.
//!
//! `quick` mode shrinks Monte-Carlo sizes for a sub-second smoke run; the
//! full suite tightens standard errors for release-grade confidence.

use crate::estimators::{
    NesConfig, nesvb_gradient, reinforce_gradient, rws_gradient, sgvb_gradient, st_gumbel_eval,
};
use crate::gradcheck::{DEFAULT_STEP, finite_diff};
use crate::model::Model;
use crate::models::gmm::GmmModel;
use crate::models::{NoisyScaleModel, generate_dataset};
use crate::params::ParamVector;
use crate::rng::RngStream;

#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    /// The check's worst-case statistic; passing means `observed <= threshold`.
    pub observed: f64,
    pub threshold: f64,
    pub detail: String,
}

impl CheckReport {
    fn conclude(name: &'static str, observed: f64, threshold: f64, detail: String) -> Self {
        Self { name, passed: observed <= threshold, observed, threshold, detail }
    }

    /// One-line, machine-grepable summary.
    pub fn line(&self) -> String {
        format!(
            "check {}: {} (observed {:.3e} vs threshold {:.3e}; {})",
            self.name,
            if self.passed { "PASS" } else { "FAIL" },
            self.observed,
            self.threshold,
            self.detail
        )
    }
}

/// Compares an analytic gradient against central finite differences of
/// `value_fn` at each point. Both closures must be pure functions of the
/// point (freeze any noise *inside* them).
pub fn check_gradient_against_fd(
    name: &'static str,
    points: &[Vec<f64>],
    grad_fn: impl Fn(&[f64]) -> Vec<f64>,
    value_fn: impl Fn(&[f64]) -> f64 + Copy,
) -> CheckReport {
    let mut worst = 0.0f64;
    let mut detail = String::new();
    for (i, point) in points.iter().enumerate() {
        let grad = grad_fn(point);
        let fd = match finite_diff(value_fn, point, DEFAULT_STEP) {
            Ok(fd) => fd,
            Err(e) => {
                return CheckReport::conclude(
                    name,
                    f64::INFINITY,
                    1.0,
                    format!("finite differences failed at point {i}: {e}"),
                );
            }
        };
        for (k, (g, d)) in grad.iter().zip(&fd).enumerate() {
            let tol = 1e-5f64.max(1e-3 * g.abs());
            let ratio = (g - d).abs() / tol;
            if ratio > worst {
                worst = ratio;
                detail =
                    format!("coord {k}, grad {g:.6e} vs fd {d:.6e} (tol {tol:.1e})");
                if points.len() > 1 {
                    detail = format!("point {i} {detail}");
                }
            }
        }
    }
    let detail = match points.len() {
        1 => detail,
        n => format!("{n} points; worst: {detail}"),
    };
    CheckReport::conclude(name, worst, 1.0, detail)
}

/// Draws `trials` estimates and tests each coordinate's mean against
/// `target` at 3 standard errors (plus an absolute `slop` floor).
pub fn check_unbiasedness(
    name: &'static str,
    target: &[f64],
    trials: usize,
    slop: f64,
    mut draw: impl FnMut() -> Vec<f64>,
) -> CheckReport {
    let dim = target.len();
    let mut mean = vec![0.0; dim];
    let mut m2 = vec![0.0; dim];
    for _ in 0..trials {
        let g = draw();
        assert_eq!(g.len(), dim);
        for k in 0..dim {
            mean[k] += g[k];
            m2[k] += g[k] * g[k];
        }
    }
    let mut worst = f64::NEG_INFINITY;
    let mut detail = String::new();
    for k in 0..dim {
        mean[k] /= trials as f64;
        let var = (m2[k] / trials as f64 - mean[k] * mean[k]).max(0.0);
        let se = (var / trials as f64).sqrt();
        let z = ((mean[k] - target[k]).abs() - slop) / (3.0 * se + f64::MIN_POSITIVE);
        if z > worst {
            worst = z;
            detail = format!(
                "worst: coord {k}, mean {:.6e} vs target {:.6e} (se {se:.2e})",
                mean[k], target[k]
            );
        }
    }
    CheckReport::conclude(name, worst, 1.0, format!("{trials} trials; {detail}"))
}

/// Exact ELBO gradient of the conjugate model at (theta, log_var), from
/// ELBO = ln p(y) - KL(q || posterior).
fn conjugate_elbo_gradient(model: &NoisyScaleModel, theta: f64, log_var: f64) -> Vec<f64> {
    let post = model.exact_posterior();
    vec![
        -(theta - post.mean()) / post.variance(),
        0.5 - log_var.exp() / (2.0 * post.variance()),
    ]
}

fn noisy_scale_params(model: &NoisyScaleModel, theta: f64, log_var: f64) -> ParamVector {
    let mut p = model.init_params();
    p.set_scalar("mean", theta).expect("layout");
    p.set_scalar("log_var", log_var).expect("layout");
    p
}

/// Probe points (theta, log_var) spread over the region the optimizers
/// actually traverse.
fn probe_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = RngStream::new(seed, 0);
    (0..n)
        .map(|_| vec![7.0 + 4.0 * rng.uniform_open01(), -2.0 + 4.0 * rng.uniform_open01()])
        .collect()
}

pub fn run_verify_suite(quick: bool) -> Vec<CheckReport> {
    let model = NoisyScaleModel::new();
    let n_points = if quick { 5 } else { 20 };
    let mut reports = Vec::new();

    // 1. Pathwise hook vs finite differences under frozen noise.
    {
        let points = probe_points(n_points, 101);
        let mut noise = RngStream::new(102, 0);
        let mut per_point = Vec::new();
        for point in &points {
            let u = noise.standard_normal();
            let m = &model;
            let grad_fn = move |p: &[f64]| {
                m.pathwise_gradient_at(&noisy_scale_params(m, p[0], p[1]), u).unwrap().1
            };
            let value_fn = move |p: &[f64]| {
                m.pathwise_gradient_at(&noisy_scale_params(m, p[0], p[1]), u).unwrap().0
            };
            per_point.push(check_gradient_against_fd(
                "sgvb-hook-vs-finite-differences",
                std::slice::from_ref(point),
                grad_fn,
                value_fn,
            ));
        }
        reports.push(merge_worst("sgvb-hook-vs-finite-differences", per_point));
    }

    // 2. Score hook vs finite differences of ln q at frozen latents.
    {
        let points = probe_points(n_points, 103);
        let mut noise = RngStream::new(104, 0);
        let mut per_point = Vec::new();
        for point in &points {
            let z = point[0] + 2.0 * noise.standard_normal();
            let m = &model;
            let grad_fn =
                move |p: &[f64]| m.score_at(&noisy_scale_params(m, p[0], p[1]), z).unwrap();
            let value_fn = move |p: &[f64]| {
                crate::model::ScoreModel::log_q(m, &noisy_scale_params(m, p[0], p[1]), z).unwrap()
            };
            per_point.push(check_gradient_against_fd(
                "reinforce-score-vs-finite-differences",
                std::slice::from_ref(point),
                grad_fn,
                value_fn,
            ));
        }
        reports.push(merge_worst("reinforce-score-vs-finite-differences", per_point));
    }

    // 3. Straight-through backward pass vs finite differences of the
    //    relaxed surrogate under frozen Gumbel noise.
    {
        let gmm = GmmModel::new(generate_dataset(2, &mut RngStream::new(105, 0)));
        let base = {
            let mut p = gmm.init_params();
            let vals = p.values_mut();
            for (k, v) in vals.iter_mut().enumerate() {
                *v = 0.1 * (k as f64 - 4.0); // mild, asymmetric head
            }
            p
        };
        let mut noise = RngStream::new(106, 0);
        let gumbels: Vec<[f64; 3]> = (0..gmm.points().len())
            .map(|_| std::array::from_fn(|_| crate::stats::gumbel_sample(&mut noise)))
            .collect();
        let tau = 0.8;
        let g = &gmm;
        let gb = &gumbels;
        let grad_fn = move |p: &[f64]| {
            let params = ParamVector::from_values(g.layout().clone(), p.to_vec()).unwrap();
            st_gumbel_eval(g, &params, gb, tau).unwrap().grad
        };
        let value_fn = move |p: &[f64]| {
            let params = ParamVector::from_values(g.layout().clone(), p.to_vec()).unwrap();
            st_gumbel_eval(g, &params, gb, tau).unwrap().relaxed_value
        };
        reports.push(check_gradient_against_fd(
            "st-gumbel-backward-vs-finite-differences",
            &[base.values().to_vec()],
            grad_fn,
            value_fn,
        ));
    }

    // 4. Perturbation estimator unbiasedness against the closed-form
    //    smoothed gradient at the standard probe point.
    {
        let (theta, log_var) = (8.5, 0.0);
        let config = NesConfig::default();
        let post = model.exact_posterior();
        let target = vec![
            -(theta - post.mean()) / post.variance(),
            0.5 - (log_var + config.sigma * config.sigma / 2.0).exp() / (2.0 * post.variance()),
        ];
        let params = noisy_scale_params(&model, theta, log_var);
        let mut rng = RngStream::new(107, 0);
        let trials = if quick { 400 } else { 4000 };
        reports.push(check_unbiasedness("nesvb-unbiasedness", &target, trials, 1e-3, || {
            nesvb_gradient(&model, &params, &config, &mut rng).unwrap().grad
        }));
    }

    // 5. Pathwise estimator unbiasedness against the exact ELBO gradient.
    {
        let (theta, log_var) = (7.8, 0.4);
        let target = conjugate_elbo_gradient(&model, theta, log_var);
        let params = noisy_scale_params(&model, theta, log_var);
        let mut rng = RngStream::new(108, 0);
        let trials = if quick { 10_000 } else { 100_000 };
        reports.push(check_unbiasedness("sgvb-unbiasedness", &target, trials, 1e-4, || {
            sgvb_gradient(&model, &params, &mut rng).unwrap().grad
        }));
    }

    // 6. Score estimator unbiasedness against the exact ELBO gradient.
    {
        let (theta, log_var) = (8.0, 0.2);
        let target = conjugate_elbo_gradient(&model, theta, log_var);
        let params = noisy_scale_params(&model, theta, log_var);
        let mut rng = RngStream::new(109, 0);
        let trials = if quick { 20_000 } else { 200_000 };
        reports.push(check_unbiasedness("reinforce-unbiasedness", &target, trials, 1e-3, || {
            reinforce_gradient(&model, &params, None, &mut rng).unwrap().grad
        }));
    }

    // 7. The deterministic-mean ablation's objective must slope upward in
    //    log_var with the exact constant rate 1/2, everywhere.
    {
        let det = NoisyScaleModel::deterministic_mean();
        let points = probe_points(n_points, 110);
        let mut worst = 0.0f64;
        let mut detail = String::new();
        for (i, point) in points.iter().enumerate() {
            let theta = point[0];
            let slope = finite_diff(
                |lv: &[f64]| {
                    let params = noisy_scale_params(&det, theta, lv[0]);
                    det.deterministic_elbo(&params).unwrap().value
                },
                &point[1..2],
                DEFAULT_STEP,
            )
            .expect("linear objective")[0];
            let err = (slope - 0.5).abs() / 1e-6;
            if err > worst {
                worst = err;
                detail = format!("worst: point {i}, slope {slope:.9} (want 0.5 exactly)");
            }
        }
        reports.push(CheckReport::conclude(
            "deterministic-ablation-log-var-slope",
            worst,
            1.0,
            format!("{} points; {detail}", points.len()),
        ));
    }

    // 8. Importance-weighted updates pull a displaced mean uphill.
    {
        let params = noisy_scale_params(&model, 6.0, 0.0);
        let mut rng = RngStream::new(111, 0);
        let trials = if quick { 500 } else { 4000 };
        let mut mean = 0.0;
        for _ in 0..trials {
            mean += rws_gradient(&model, &params, 5, &mut rng).unwrap().grad[0];
        }
        mean /= trials as f64;
        reports.push(CheckReport::conclude(
            "rws-uphill-pull",
            0.5 - mean,
            0.0,
            format!("{trials} trials; mean location-gradient {mean:.4} (want > 0.5)"),
        ));
    }

    reports
}

/// Collapses per-point reports for the same check into the worst one.
fn merge_worst(name: &'static str, reports: Vec<CheckReport>) -> CheckReport {
    let n = reports.len();
    let (index, worst) = reports
        .into_iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.observed.partial_cmp(&b.observed).expect("finite observations"))
        .expect("at least one report");
    CheckReport {
        name,
        passed: worst.passed,
        observed: worst.observed,
        threshold: worst.threshold,
        detail: format!("{n} points; worst: point {index}, {}", worst.detail),
    }
}
