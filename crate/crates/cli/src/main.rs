//! Command-line runner for the variational-inference experiments.
//!
//! Exit codes: 0 success; 1 an operation ran and reported failure (e.g. a
//! verification check failed); 2 invalid usage or configuration; 3 I/O or
//! serialization failure.

use clap::{Args, Parser, Subcommand};
use nesvb::estimators::EstimatorKind;
use nesvb::experiments::{
    Experiment, ExperimentError, RunConfig, RunResult, VarianceConfig,
    measure_estimator_variance, run_experiment, write_outputs,
};
use nesvb::optimizer::OptimizerKind;
use nesvb::verify::run_verify_suite;
use serde::Deserialize;
use std::fmt::Display;
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "nesvb", version, about = "Variational inference with black-box and classic ELBO gradient estimators")]
struct Cli {
    /// Worker threads for seed-parallel runs (default: all cores).
    /// Results are identical for any thread count.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an optimization experiment and write traces + summary files.
    Run(Box<RunArgs>),
    /// Self-check gradient hooks and estimators against finite differences
    /// and Monte-Carlo ground truth.
    Verify {
        /// Shrink Monte-Carlo sizes for a fast smoke check.
        #[arg(long)]
        quick: bool,
    },
    /// Measure per-estimate gradient variance on the scalar problem.
    Variance(VarianceArgs),
    /// Print the effective default configuration for an
    /// experiment/estimator pair as JSON.
    Defaults {
        #[arg(long)]
        experiment: String,
        #[arg(long)]
        estimator: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// Problem to optimize: noisy-scale, ablation, or gmm.
    #[arg(long)]
    experiment: Option<String>,
    /// Gradient estimator: nesvb, sgvb, reinforce, rws, or st-gumbel.
    #[arg(long)]
    estimator: Option<String>,
    /// JSON file with configuration overrides (command-line flags win).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; the run writes into
    /// <out>/<experiment>_<estimator>/.
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    n_seeds: Option<usize>,
    #[arg(long)]
    master_seed: Option<u64>,
    /// sgd or adam.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    clip_norm: Option<f64>,
    /// Perturbation scale of the evolution-strategies estimator.
    #[arg(long)]
    sigma: Option<f64>,
    /// Mirrored perturbation pairs per gradient estimate.
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    fitness_shaping: Option<bool>,
    #[arg(long, value_name = "BOOL")]
    common_random_numbers: Option<bool>,
    /// Particles for the importance-weighted estimator.
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long, value_name = "BOOL")]
    reinforce_baseline: Option<bool>,
    /// Relaxation temperature of the straight-through estimator.
    #[arg(long)]
    temperature: Option<f64>,
    /// Mixture dataset size per component.
    #[arg(long)]
    n_per_component: Option<usize>,
}

#[derive(Args)]
struct VarianceArgs {
    /// nesvb, sgvb, reinforce, or rws.
    #[arg(long)]
    estimator: String,
    /// Gradient estimates to draw (at least 100 for a stable variance).
    #[arg(long, default_value_t = 10_000)]
    trials: usize,
    /// Probe point: variational location.
    #[arg(long, default_value_t = 8.5)]
    theta: f64,
    /// Probe point: variational log-variance.
    #[arg(long, default_value_t = 0.0)]
    log_var: f64,
    #[arg(long, default_value_t = 42)]
    master_seed: u64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    fitness_shaping: bool,
    #[arg(long)]
    common_random_numbers: bool,
    #[arg(long)]
    n_particles: Option<usize>,
    #[arg(long)]
    reinforce_baseline: bool,
}

/// Config-file schema: every field optional, command-line flags win.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    experiment: Option<Experiment>,
    estimator: Option<EstimatorKind>,
    steps: Option<usize>,
    n_seeds: Option<usize>,
    master_seed: Option<u64>,
    optimizer: Option<OptimizerKind>,
    learning_rate: Option<f64>,
    clip_norm: Option<f64>,
    sigma: Option<f64>,
    n_pairs: Option<usize>,
    fitness_shaping: Option<bool>,
    common_random_numbers: Option<bool>,
    n_particles: Option<usize>,
    reinforce_baseline: Option<bool>,
    temperature: Option<f64>,
    n_per_component: Option<usize>,
}

fn fail(code: u8, message: impl Display) -> ! {
    eprintln!("error: {message}");
    std::process::exit(code as i32)
}

fn parse_or_usage<T: std::str::FromStr>(what: &str, s: &str) -> T
where
    T::Err: Display,
{
    s.parse().unwrap_or_else(|e| fail(EXIT_USAGE, format!("invalid {what}: {e}")))
}

fn parse_optimizer(s: &str) -> OptimizerKind {
    match s {
        "sgd" => OptimizerKind::Sgd,
        "adam" => OptimizerKind::Adam,
        other => fail(EXIT_USAGE, format!("unknown optimizer {other:?}; expected sgd or adam")),
    }
}

/// defaults <- config file <- command-line flags.
fn resolve_run_config(args: &RunArgs) -> (RunConfig, Option<serde_json::Value>) {
    let (file, echo) = match &args.config {
        None => (PartialConfig::default(), None),
        Some(path) => {
            let text = std::fs::read_to_string(path).unwrap_or_else(|e| {
                fail(EXIT_USAGE, format!("cannot read config file {}: {e}", path.display()))
            });
            let parsed: PartialConfig = serde_json::from_str(&text).unwrap_or_else(|e| {
                fail(EXIT_USAGE, format!("invalid config file {}: {e}", path.display()))
            });
            let echo: serde_json::Value =
                serde_json::from_str(&text).expect("validated JSON parses as a value");
            (parsed, Some(echo))
        }
    };

    let experiment: Experiment = args
        .experiment
        .as_deref()
        .map(|s| parse_or_usage("experiment", s))
        .or(file.experiment)
        .unwrap_or_else(|| fail(EXIT_USAGE, "missing --experiment (or an experiment entry in the config file)"));
    let estimator: EstimatorKind = args
        .estimator
        .as_deref()
        .map(|s| parse_or_usage("estimator", s))
        .or(file.estimator)
        .unwrap_or_else(|| fail(EXIT_USAGE, "missing --estimator (or an estimator entry in the config file)"));

    let mut config = RunConfig::new(experiment, estimator);
    macro_rules! layer {
        ($field:ident, $cli:expr) => {
            if let Some(v) = file.$field {
                config.$field = v;
            }
            if let Some(v) = $cli {
                config.$field = v;
            }
        };
    }
    layer!(steps, args.steps);
    layer!(n_seeds, args.n_seeds);
    layer!(master_seed, args.master_seed);
    layer!(optimizer, args.optimizer.as_deref().map(parse_optimizer));
    layer!(learning_rate, args.learning_rate);
    layer!(sigma, args.sigma);
    layer!(n_pairs, args.n_pairs);
    layer!(fitness_shaping, args.fitness_shaping);
    layer!(common_random_numbers, args.common_random_numbers);
    layer!(n_particles, args.n_particles);
    layer!(reinforce_baseline, args.reinforce_baseline);
    layer!(temperature, args.temperature);
    layer!(n_per_component, args.n_per_component);
    // clip_norm stays None unless given somewhere.
    if file.clip_norm.is_some() {
        config.clip_norm = file.clip_norm;
    }
    if args.clip_norm.is_some() {
        config.clip_norm = args.clip_norm;
    }

    (config, echo)
}

fn run(args: &RunArgs) -> ExitCode {
    let (config, echo) = resolve_run_config(args);
    if let Err(e) = config.validate() {
        fail(EXIT_USAGE, e);
    }
    let mut result: RunResult = match run_experiment(&config) {
        Ok(r) => r,
        Err(e @ (ExperimentError::Io(_) | ExperimentError::Json(_))) => fail(EXIT_IO, e),
        Err(e) => fail(EXIT_USAGE, e),
    };
    result.config_file = echo;
    let run_dir = match write_outputs(&result, &args.out) {
        Ok(dir) => dir,
        Err(e) => fail(EXIT_IO, e),
    };

    println!(
        "{} / {}: {} steps x {} seeds (master seed {})",
        config.experiment, config.estimator, config.steps, config.n_seeds, config.master_seed
    );
    for seed in &result.seeds {
        let params: Vec<String> = seed
            .final_params
            .layout()
            .entries()
            .map(|(name, start, len)| {
                let vals: Vec<String> = seed.final_params.values()[start..start + len]
                    .iter()
                    .map(|v| format!("{v:.6}"))
                    .collect();
                format!("{name}=[{}]", vals.join(", "))
            })
            .collect();
        let mut line = format!("  seed {}: {}", seed.seed, params.join(" "));
        if let Some(acc) = seed.accuracy {
            line.push_str(&format!(" accuracy={acc:.4}"));
        }
        if let Some(step) = seed.log_var_exit_step {
            line.push_str(&format!(" log_var_exited_at={step}"));
        }
        if let Some(d) = &seed.diverged {
            line.push_str(&format!(" DIVERGED at step {}: {}", d.step, d.reason));
        }
        println!("{line}");
    }
    if let Some(acc) = result.mean_accuracy() {
        println!("  mean accuracy: {acc:.4}");
    }
    println!("wrote {}", run_dir.display());
    ExitCode::SUCCESS
}

fn verify(quick: bool) -> ExitCode {
    let reports = run_verify_suite(quick);
    let mut all_passed = true;
    for report in &reports {
        println!("{}", report.line());
        all_passed &= report.passed;
    }
    if all_passed {
        println!("all {} checks passed", reports.len());
        ExitCode::SUCCESS
    } else {
        eprintln!("verification failed");
        ExitCode::from(EXIT_CHECK_FAILED)
    }
}

fn variance(args: &VarianceArgs) -> ExitCode {
    if args.trials < 100 {
        fail(EXIT_USAGE, format!("--trials must be at least 100, got {}", args.trials));
    }
    let mut config = VarianceConfig::new(parse_or_usage("estimator", &args.estimator));
    config.theta = args.theta;
    config.log_var = args.log_var;
    config.trials = args.trials;
    config.master_seed = args.master_seed;
    config.fitness_shaping = args.fitness_shaping;
    config.common_random_numbers = args.common_random_numbers;
    config.reinforce_baseline = args.reinforce_baseline;
    if let Some(v) = args.sigma {
        config.sigma = v;
    }
    if let Some(v) = args.n_pairs {
        config.n_pairs = v;
    }
    if let Some(v) = args.n_particles {
        config.n_particles = v;
    }
    match measure_estimator_variance(&config) {
        Ok(report) => {
            println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(e) => fail(EXIT_USAGE, e),
    }
}

fn defaults(experiment: &str, estimator: &str) -> ExitCode {
    let config = RunConfig::new(
        parse_or_usage("experiment", experiment),
        parse_or_usage("estimator", estimator),
    );
    if let Err(e) = config.validate() {
        fail(EXIT_USAGE, e);
    }
    println!("{}", serde_json::to_string_pretty(&config).expect("config serializes"));
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if threads == 0 {
            fail(EXIT_USAGE, "--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .unwrap_or_else(|e| fail(EXIT_USAGE, format!("cannot size the thread pool: {e}")));
    }
    match &cli.command {
        Command::Run(args) => run(args),
        Command::Verify { quick } => verify(*quick),
        Command::Variance(args) => variance(args),
        Command::Defaults { experiment, estimator } => defaults(experiment, estimator),
    }
}
