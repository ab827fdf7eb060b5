//! Deterministic on-disk outputs for experiment runs.
//!
//! Each run writes into `<out_dir>/<experiment>_<estimator>/`:
//!
//! * `trace_seed<k>.csv` — one row per optimization step (step 0 is the
//!   initialization), columns `step,seed,elbo,<extras...>`;
//! * `mean_trace.csv` — per-step averages over the seeds that reached the
//!   step, with an `n_seeds` column;
//! * `assignments_seed<k>.csv` (mixture runs) — the per-seed dataset with
//!   final hard assignments, columns `x1,x2,true_label,assigned_label`;
//! * `summary.json` — the full effective configuration, per-seed final
//!   parameters and diagnostics, means, and the wall-clock time.
//!
//! All floats are written with nine significant digits, files are written
//! atomically (temp file + rename), and map keys are sorted — so two runs
//! of the same configuration produce byte-identical files, except for the
//! `wall_clock_seconds` line in `summary.json`.

use crate::experiments::{DivergenceInfo, ExperimentError, RunResult};
use serde::Serialize;
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

/// Nine significant digits: enough to reconstruct trajectories for
/// plotting and comparisons while keeping files diffable.
pub fn fmt_g9(v: f64) -> String {
    format!("{v:.8e}")
}

fn write_atomic(path: &Path, contents: &str) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)
}

#[derive(Serialize)]
struct SeedSummary<'a> {
    seed: usize,
    final_params: BTreeMap<&'a str, Vec<f64>>,
    final_elbo: f64,
    diverged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    divergence: Option<&'a DivergenceInfo>,
    #[serde(skip_serializing_if = "Option::is_none")]
    log_var_exit_step: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    accuracy: Option<f64>,
}

#[derive(Serialize)]
struct Summary<'a> {
    config: &'a crate::experiments::RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_file: Option<&'a serde_json::Value>,
    seeds: Vec<SeedSummary<'a>>,
    mean_final_params: BTreeMap<String, Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mean_accuracy: Option<f64>,
    wall_clock_seconds: f64,
}

/// Writes every output file for `result` and returns the run directory.
pub fn write_outputs(result: &RunResult, out_dir: &Path) -> Result<PathBuf, ExperimentError> {
    let run_dir = out_dir.join(format!(
        "{}_{}",
        result.config.experiment.dir_name(),
        result.config.estimator.as_str().replace('-', "_")
    ));
    fs::create_dir_all(&run_dir)?;

    for run in &result.seeds {
        let mut csv = format!("step,seed,elbo,{}\n", result.trace_columns.join(","));
        for rec in &run.trace {
            csv.push_str(&format!("{},{},{}", rec.step, run.seed, fmt_g9(rec.elbo)));
            for v in &rec.extras {
                csv.push(',');
                csv.push_str(&fmt_g9(*v));
            }
            csv.push('\n');
        }
        write_atomic(&run_dir.join(format!("trace_seed{}.csv", run.seed)), &csv)?;

        if let (Some(points), Some(assignments)) = (&run.points, &run.assignments) {
            let mut csv = String::from("x1,x2,true_label,assigned_label\n");
            for (p, a) in points.iter().zip(assignments) {
                csv.push_str(&format!(
                    "{},{},{},{a}\n",
                    fmt_g9(p.x[0]),
                    fmt_g9(p.x[1]),
                    p.true_label
                ));
            }
            write_atomic(&run_dir.join(format!("assignments_seed{}.csv", run.seed)), &csv)?;
        }
    }

    // Mean trace over the seeds that reached each step.
    let n_cols = 1 + result.trace_columns.len(); // elbo + extras
    let max_len = result.seeds.iter().map(|s| s.trace.len()).max().unwrap_or(0);
    let mut csv = format!("step,elbo,{},n_seeds\n", result.trace_columns.join(","));
    for row in 0..max_len {
        let mut acc = vec![0.0; n_cols];
        let mut n = 0usize;
        let mut step = 0usize;
        for run in &result.seeds {
            if let Some(rec) = run.trace.get(row) {
                step = rec.step;
                acc[0] += rec.elbo;
                for (a, v) in acc[1..].iter_mut().zip(&rec.extras) {
                    *a += v;
                }
                n += 1;
            }
        }
        csv.push_str(&step.to_string());
        for a in acc {
            csv.push(',');
            csv.push_str(&fmt_g9(a / n as f64));
        }
        csv.push_str(&format!(",{n}\n"));
    }
    write_atomic(&run_dir.join("mean_trace.csv"), &csv)?;

    let summary = Summary {
        config: &result.config,
        config_file: result.config_file.as_ref(),
        seeds: result
            .seeds
            .iter()
            .map(|run| SeedSummary {
                seed: run.seed,
                final_params: run
                    .final_params
                    .layout()
                    .entries()
                    .map(|(name, start, len)| {
                        (name, run.final_params.values()[start..start + len].to_vec())
                    })
                    .collect(),
                final_elbo: run.trace.last().expect("trace always has step 0").elbo,
                diverged: run.diverged.is_some(),
                divergence: run.diverged.as_ref(),
                log_var_exit_step: run.log_var_exit_step,
                accuracy: run.accuracy,
            })
            .collect(),
        mean_final_params: result.mean_final_params(),
        mean_accuracy: result.mean_accuracy(),
        wall_clock_seconds: result.wall_clock_seconds,
    };
    let mut json = serde_json::to_string_pretty(&summary)?;
    json.push('\n');
    write_atomic(&run_dir.join("summary.json"), &json)?;

    Ok(run_dir)
}
