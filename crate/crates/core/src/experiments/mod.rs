//! Reproducible optimization experiments.
//!
//! An experiment is a (problem, estimator) pair run for a fixed number of
//! ascent steps across several independent seeds. Every random draw is
//! addressed by a pure stream-derivation scheme rooted at the master seed:
//!
//! ```text
//! root(master_seed) -> seed k -> purpose -> step
//! ```
//!
//! with purposes DATASET (1), GRAD (2) and TRACE (3). A seed's result is a
//! pure function of `(master_seed, k)` and the configuration — independent
//! of thread scheduling (seeds run in parallel) and of whether other seeds
//! ran at all.
//!
//! Failure handling: a step whose gradient or update is non-finite marks
//! the seed as diverged at that step and stops it, keeping the last good
//! parameters. On the scalar problems the first step at which |log_var|
//! leaves [-10, 10] is recorded (the run continues), which is how the
//! deterministic-mean ablation's runaway variance is detected.

pub mod output;
pub mod variance;

pub use output::write_outputs;
pub use variance::{VarianceConfig, VarianceReport, measure_estimator_variance};

use crate::estimators::{
    EstimatorError, EstimatorKind, NesConfig, ReinforceBaseline, nesvb_gradient,
    reinforce_gradient, rws_gradient, sgvb_gradient, st_gumbel_gradient,
};
use crate::model::Model;
use crate::models::gmm::{GmmModel, GmmPoint, generate_dataset};
use crate::models::noisy_scale::NoisyScaleModel;
use crate::optimizer::{Optimizer, OptimizerConfig, OptimizerKind};
use crate::params::ParamVector;
use crate::rng::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;
use thiserror::Error;

pub const PURPOSE_DATASET: u64 = 1;
pub const PURPOSE_GRAD: u64 = 2;
pub const PURPOSE_TRACE: u64 = 3;

/// |log_var| beyond this bound counts as variance collapse/blow-up.
pub const LOG_VAR_BOUND: f64 = 10.0;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("estimator {estimator} is not available for experiment {experiment}")]
    InvalidCombination { experiment: Experiment, estimator: EstimatorKind },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// Conjugate scalar-location problem (stochastic ELBO).
    NoisyScale,
    /// Same problem with the deterministic-mean objective.
    Ablation,
    /// Gaussian mixture with discrete per-point latents.
    Gmm,
}

impl Experiment {
    pub const ALL: [Experiment; 3] =
        [Experiment::NoisyScale, Experiment::Ablation, Experiment::Gmm];

    pub fn as_str(&self) -> &'static str {
        match self {
            Experiment::NoisyScale => "noisy-scale",
            Experiment::Ablation => "ablation",
            Experiment::Gmm => "gmm",
        }
    }

    /// Estimators that can run on this experiment. The score-based
    /// estimators are absent from the mixture problem (its latent is
    /// per-point discrete, handled by the straight-through relaxation) and
    /// plain score estimation is excluded from the ablation (its interest
    /// is the contrast between perturbation and sampling estimators).
    pub fn valid_estimators(&self) -> &'static [EstimatorKind] {
        match self {
            Experiment::NoisyScale => &[
                EstimatorKind::Nesvb,
                EstimatorKind::Sgvb,
                EstimatorKind::Reinforce,
                EstimatorKind::Rws,
            ],
            Experiment::Ablation => {
                &[EstimatorKind::Nesvb, EstimatorKind::Sgvb, EstimatorKind::Rws]
            }
            Experiment::Gmm => &[EstimatorKind::Nesvb, EstimatorKind::StGumbel],
        }
    }

    /// Directory-name-safe form (kebab-case flattened to snake_case).
    pub fn dir_name(&self) -> String {
        self.as_str().replace('-', "_")
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown experiment {0:?}; expected one of noisy-scale, ablation, gmm")]
pub struct UnknownExperiment(String);

impl FromStr for Experiment {
    type Err = UnknownExperiment;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "noisy-scale" | "noisy_scale" => Ok(Experiment::NoisyScale),
            "ablation" => Ok(Experiment::Ablation),
            "gmm" => Ok(Experiment::Gmm),
            other => Err(UnknownExperiment(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub estimator: EstimatorKind,
    pub steps: usize,
    pub n_seeds: usize,
    pub master_seed: u64,
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub clip_norm: Option<f64>,
    /// Perturbation scale (evolution-strategies estimator).
    pub sigma: f64,
    /// Mirrored pairs per estimate (evolution-strategies estimator).
    pub n_pairs: usize,
    pub fitness_shaping: bool,
    pub common_random_numbers: bool,
    /// Particles for the importance-weighted estimator.
    pub n_particles: usize,
    /// Center the score estimator with a running baseline.
    pub reinforce_baseline: bool,
    /// Relaxation temperature (straight-through estimator).
    pub temperature: f64,
    /// Mixture dataset size per component.
    pub n_per_component: usize,
}

impl RunConfig {
    /// Standard settings for an experiment/estimator pair: 2500 steps at
    /// sigma 0.1 on the scalar problems, 500 steps at sigma 0.05 on the
    /// mixture; Adam at 0.01, 5 seeds, master seed 42 everywhere.
    pub fn new(experiment: Experiment, estimator: EstimatorKind) -> Self {
        let (steps, sigma) = match experiment {
            Experiment::NoisyScale | Experiment::Ablation => (2500, 0.1),
            Experiment::Gmm => (500, 0.05),
        };
        Self {
            experiment,
            estimator,
            steps,
            n_seeds: 5,
            master_seed: 42,
            optimizer: OptimizerKind::Adam,
            learning_rate: 0.01,
            clip_norm: None,
            sigma,
            n_pairs: 25,
            fitness_shaping: false,
            common_random_numbers: false,
            n_particles: 5,
            reinforce_baseline: false,
            temperature: 1.0,
            n_per_component: 100,
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if !self.experiment.valid_estimators().contains(&self.estimator) {
            return Err(ExperimentError::InvalidCombination {
                experiment: self.experiment,
                estimator: self.estimator,
            });
        }
        let positive: [(&str, f64); 3] = [
            ("learning_rate", self.learning_rate),
            ("sigma", self.sigma),
            ("temperature", self.temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        if let Some(c) = self.clip_norm
            && !(c.is_finite() && c > 0.0)
        {
            return Err(ExperimentError::InvalidConfig(format!(
                "clip_norm must be positive and finite, got {c}"
            )));
        }
        let at_least: [(&str, usize, usize); 5] = [
            ("steps", self.steps, 1),
            ("n_seeds", self.n_seeds, 1),
            ("n_pairs", self.n_pairs, 1),
            ("n_particles", self.n_particles, 2),
            ("n_per_component", self.n_per_component, 1),
        ];
        for (name, v, min) in at_least {
            if v < min {
                return Err(ExperimentError::InvalidConfig(format!(
                    "{name} must be at least {min}, got {v}"
                )));
            }
        }
        Ok(())
    }

    fn nes_config(&self) -> NesConfig {
        NesConfig {
            sigma: self.sigma,
            n_pairs: self.n_pairs,
            fitness_shaping: self.fitness_shaping,
            common_random_numbers: self.common_random_numbers,
        }
    }

    fn optimizer_config(&self) -> OptimizerConfig {
        OptimizerConfig {
            kind: self.optimizer,
            learning_rate: self.learning_rate,
            clip_norm: self.clip_norm,
        }
    }
}

/// One traced step: the ELBO probe plus problem-specific extras
/// (see [`RunResult::trace_columns`]).
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub step: usize,
    pub elbo: f64,
    pub extras: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DivergenceInfo {
    pub step: usize,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: usize,
    pub trace: Vec<TraceRecord>,
    /// Last finite parameters (pre-divergence if the seed diverged).
    pub final_params: ParamVector,
    pub diverged: Option<DivergenceInfo>,
    /// First step at which |log_var| left [-LOG_VAR_BOUND, LOG_VAR_BOUND].
    pub log_var_exit_step: Option<usize>,
    /// Mixture runs: the per-seed dataset and its final hard assignments.
    pub points: Option<Vec<GmmPoint>>,
    pub assignments: Option<Vec<usize>>,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub config: RunConfig,
    /// Names of [`TraceRecord::extras`] columns.
    pub trace_columns: Vec<&'static str>,
    pub seeds: Vec<SeedRun>,
    pub wall_clock_seconds: f64,
    /// Verbatim echo of a user-supplied configuration file, if any.
    pub config_file: Option<serde_json::Value>,
}

impl RunResult {
    /// Per-slice mean of the final parameters over non-diverged seeds
    /// (over all seeds if every seed diverged).
    pub fn mean_final_params(&self) -> std::collections::BTreeMap<String, Vec<f64>> {
        let healthy: Vec<&SeedRun> =
            self.seeds.iter().filter(|s| s.diverged.is_none()).collect();
        let pool: Vec<&SeedRun> =
            if healthy.is_empty() { self.seeds.iter().collect() } else { healthy };
        let mut out = std::collections::BTreeMap::new();
        let layout = pool[0].final_params.layout().clone();
        for (name, start, len) in layout.entries() {
            let mut mean = vec![0.0; len];
            for s in &pool {
                for (m, v) in mean.iter_mut().zip(&s.final_params.values()[start..start + len]) {
                    *m += v / pool.len() as f64;
                }
            }
            out.insert(name.to_string(), mean);
        }
        out
    }

    pub fn mean_accuracy(&self) -> Option<f64> {
        let accs: Vec<f64> = self.seeds.iter().filter_map(|s| s.accuracy).collect();
        if accs.is_empty() {
            None
        } else {
            Some(accs.iter().sum::<f64>() / accs.len() as f64)
        }
    }
}

fn seed_root(config: &RunConfig, seed: usize) -> RngStream {
    RngStream::new(config.master_seed, 0).substream(seed as u64)
}

/// Shared per-seed ascent loop. `gradient` computes the estimate for a
/// step from its dedicated stream; `trace_extras` reads the traced columns
/// off the current parameters; `elbo_probe` draws the traced ELBO value.
fn ascend_seed(
    config: &RunConfig,
    seed: usize,
    mut params: ParamVector,
    mut gradient: impl FnMut(&ParamVector, &mut RngStream) -> Result<Vec<f64>, EstimatorError>,
    trace_extras: impl Fn(&ParamVector) -> Vec<f64>,
    elbo_probe: impl Fn(&ParamVector, &mut RngStream) -> f64,
    watch_log_var: bool,
) -> SeedRun {
    let root = seed_root(config, seed);
    let grad_root = root.substream(PURPOSE_GRAD);
    let trace_root = root.substream(PURPOSE_TRACE);
    let mut optimizer = Optimizer::new(config.optimizer_config(), params.len());

    let mut trace = Vec::with_capacity(config.steps + 1);
    let mut diverged = None;
    let mut log_var_exit_step = None;
    let record =
        |trace: &mut Vec<TraceRecord>, step: usize, params: &ParamVector| {
            let mut trace_rng = trace_root.substream(step as u64);
            trace.push(TraceRecord {
                step,
                elbo: elbo_probe(params, &mut trace_rng),
                extras: trace_extras(params),
            });
        };
    record(&mut trace, 0, &params);

    for step in 1..=config.steps {
        let mut grad_rng = grad_root.substream(step as u64);
        let grad = match gradient(&params, &mut grad_rng) {
            Ok(g) => g,
            Err(e) => {
                diverged = Some(DivergenceInfo { step, reason: e.to_string() });
                break;
            }
        };
        let snapshot = params.clone();
        if let Err(e) = optimizer.step(&mut params, &grad) {
            params = snapshot;
            diverged = Some(DivergenceInfo { step, reason: e.to_string() });
            break;
        }
        if watch_log_var
            && log_var_exit_step.is_none()
            && params.scalar("log_var").expect("layout").abs() > LOG_VAR_BOUND
        {
            log_var_exit_step = Some(step);
        }
        record(&mut trace, step, &params);
    }

    SeedRun {
        seed,
        trace,
        final_params: params,
        diverged,
        log_var_exit_step,
        points: None,
        assignments: None,
        accuracy: None,
    }
}

fn run_noisy_seed(config: &RunConfig, seed: usize) -> SeedRun {
    let model = match config.experiment {
        Experiment::NoisyScale => NoisyScaleModel::new(),
        Experiment::Ablation => NoisyScaleModel::deterministic_mean(),
        Experiment::Gmm => unreachable!("validated"),
    };
    let nes = config.nes_config();
    let mut baseline = config.reinforce_baseline.then(ReinforceBaseline::new);
    let estimator = config.estimator;
    let n_particles = config.n_particles;
    ascend_seed(
        config,
        seed,
        model.init_params(),
        |params, rng| {
            let estimate = match estimator {
                EstimatorKind::Nesvb => nesvb_gradient(&model, params, &nes, rng)?,
                EstimatorKind::Sgvb => sgvb_gradient(&model, params, rng)?,
                EstimatorKind::Reinforce => {
                    reinforce_gradient(&model, params, baseline.as_mut(), rng)?
                }
                EstimatorKind::Rws => rws_gradient(&model, params, n_particles, rng)?,
                EstimatorKind::StGumbel => unreachable!("validated"),
            };
            Ok(estimate.grad)
        },
        |params| {
            vec![params.scalar("mean").expect("layout"), params.scalar("log_var").expect("layout")]
        },
        |params, rng| model.elbo(params, rng).map(|e| e.value).unwrap_or(f64::NAN),
        true,
    )
}

fn slice_norm(params: &ParamVector, name: &str) -> f64 {
    params.get(name).expect("layout").iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn run_gmm_seed(config: &RunConfig, seed: usize) -> SeedRun {
    let mut dataset_rng = seed_root(config, seed).substream(PURPOSE_DATASET);
    let points = generate_dataset(config.n_per_component, &mut dataset_rng);
    let model = GmmModel::new(points.clone());
    let nes = config.nes_config();
    let estimator = config.estimator;
    let temperature = config.temperature;
    let mut run = ascend_seed(
        config,
        seed,
        model.init_params(),
        |params, rng| {
            let estimate = match estimator {
                EstimatorKind::Nesvb => nesvb_gradient(&model, params, &nes, rng)?,
                EstimatorKind::StGumbel => st_gumbel_gradient(&model, params, temperature, rng)?,
                _ => unreachable!("validated"),
            };
            Ok(estimate.grad)
        },
        |params| vec![slice_norm(params, "weights"), slice_norm(params, "bias")],
        |params, rng| model.elbo(params, rng).map(|e| e.value).unwrap_or(f64::NAN),
        false,
    );
    let assignments = model.assignments(&run.final_params);
    run.accuracy = Some(model.adjusted_accuracy(&assignments));
    run.assignments = Some(assignments);
    run.points = Some(points);
    run
}

/// Runs all seeds (in parallel; results are schedule-independent) and
/// gathers traces, final parameters and diagnostics.
pub fn run_experiment(config: &RunConfig) -> Result<RunResult, ExperimentError> {
    config.validate()?;
    let start = Instant::now();
    let seeds: Vec<SeedRun> = (0..config.n_seeds)
        .into_par_iter()
        .map(|seed| match config.experiment {
            Experiment::NoisyScale | Experiment::Ablation => run_noisy_seed(config, seed),
            Experiment::Gmm => run_gmm_seed(config, seed),
        })
        .collect();
    let trace_columns = match config.experiment {
        Experiment::NoisyScale | Experiment::Ablation => vec!["mean", "log_var"],
        Experiment::Gmm => vec!["weights_norm", "bias_norm"],
    };
    Ok(RunResult {
        config: config.clone(),
        trace_columns,
        seeds,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        config_file: None,
    })
}
