//! End-to-end tests of the `nesvb` binary: exit codes, file outputs,
//! configuration layering, and rerun determinism.

use std::path::Path;
use std::process::{Command, Output};

fn nesvb(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nesvb"))
        .args(args)
        .output()
        .expect("binary spawns")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_expected_files_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let out_dir = tmp.path().join("runs");
    let out = nesvb(&[
        "run",
        "--experiment",
        "noisy-scale",
        "--estimator",
        "sgvb",
        "--steps",
        "5",
        "--n-seeds",
        "2",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("noisy-scale / sgvb: 5 steps x 2 seeds"), "{text}");
    assert!(text.contains("wrote "), "{text}");

    let run_dir = out_dir.join("noisy_scale_sgvb");
    for file in ["trace_seed0.csv", "trace_seed1.csv", "mean_trace.csv", "summary.json"] {
        assert!(run_dir.join(file).is_file(), "missing {file}");
    }
    let summary = read_json(&run_dir.join("summary.json"));
    assert_eq!(summary["config"]["steps"], 5);
    assert_eq!(summary["config"]["estimator"], "sgvb");
    assert_eq!(summary["seeds"].as_array().unwrap().len(), 2);
    assert!(summary["wall_clock_seconds"].is_f64());
    assert!(summary.get("config_file").is_none(), "no config file was given");

    let trace = std::fs::read_to_string(run_dir.join("trace_seed0.csv")).unwrap();
    assert!(trace.starts_with("step,seed,elbo,mean,log_var\n"));
    assert_eq!(trace.lines().count(), 1 + 6, "header plus steps 0..=5");
}

#[test]
fn mixture_run_writes_assignments() {
    let tmp = tempfile::tempdir().unwrap();
    let out = nesvb(&[
        "run",
        "--experiment",
        "gmm",
        "--estimator",
        "st-gumbel",
        "--steps",
        "3",
        "--n-seeds",
        "1",
        "--n-per-component",
        "4",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let assignments = tmp.path().join("gmm_st_gumbel").join("assignments_seed0.csv");
    let text = std::fs::read_to_string(assignments).unwrap();
    assert!(text.starts_with("x1,x2,true_label,assigned_label\n"));
    assert_eq!(text.lines().count(), 1 + 12, "header plus 3 x 4 points");
    assert!(stdout(&out).contains("mean accuracy:"));
}

#[test]
fn invalid_combination_is_a_usage_error() {
    let out = nesvb(&["run", "--experiment", "gmm", "--estimator", "reinforce"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("not available"), "{}", stderr(&out));
}

#[test]
fn unknown_estimator_is_a_usage_error() {
    let out = nesvb(&["run", "--experiment", "noisy-scale", "--estimator", "bogus"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("bogus"), "{}", stderr(&out));
}

#[test]
fn invalid_setting_is_a_usage_error() {
    let out = nesvb(&[
        "run",
        "--experiment",
        "noisy-scale",
        "--estimator",
        "nesvb",
        "--sigma",
        "0",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sigma"), "{}", stderr(&out));
}

#[test]
fn verify_quick_reports_every_check() {
    let out = nesvb(&["verify", "--quick"]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let check_lines: Vec<&str> = text.lines().filter(|l| l.starts_with("check ")).collect();
    assert_eq!(check_lines.len(), 8, "{text}");
    assert!(check_lines.iter().all(|l| l.contains(": PASS")), "{text}");
    assert!(text.contains("all 8 checks passed"), "{text}");
}

#[test]
fn variance_prints_a_json_report() {
    let out = nesvb(&[
        "variance",
        "--estimator",
        "nesvb",
        "--trials",
        "200",
        "--n-pairs",
        "2",
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    let report: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["estimator"], "nesvb");
    assert_eq!(report["trials"], 200);
    assert_eq!(report["evaluations_per_trial"], 4);
    assert!(report["trace_variance"].as_f64().unwrap() > 0.0);
}

#[test]
fn variance_rejects_tiny_trial_counts() {
    let out = nesvb(&["variance", "--estimator", "sgvb", "--trials", "50"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("at least 100"), "{}", stderr(&out));
}

#[test]
fn defaults_prints_the_standard_configuration() {
    let out = nesvb(&["defaults", "--experiment", "noisy-scale", "--estimator", "nesvb"]);
    assert_eq!(code(&out), 0);
    let config: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(config["steps"], 2500);
    assert_eq!(config["sigma"], 0.1);
    assert_eq!(config["n_seeds"], 5);
    assert_eq!(config["master_seed"], 42);
    assert_eq!(config["optimizer"], "adam");

    let out = nesvb(&["defaults", "--experiment", "gmm", "--estimator", "st-gumbel"]);
    let config: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(config["steps"], 500);
    assert_eq!(config["sigma"], 0.05);
}

#[test]
fn config_file_layers_under_command_line_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("run.json");
    std::fs::write(
        &config_path,
        r#"{ "experiment": "noisy-scale", "estimator": "sgvb", "steps": 7, "learning_rate": 0.02 }"#,
    )
    .unwrap();
    let out = nesvb(&[
        "run",
        "--config",
        config_path.to_str().unwrap(),
        "--steps",
        "4",
        "--out",
        tmp.path().join("runs").to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));

    let summary = read_json(&tmp.path().join("runs").join("noisy_scale_sgvb").join("summary.json"));
    // Flag beats file; file beats default; the file is echoed verbatim.
    assert_eq!(summary["config"]["steps"], 4);
    assert_eq!(summary["config"]["learning_rate"], 0.02);
    assert_eq!(summary["config"]["estimator"], "sgvb");
    assert_eq!(summary["config_file"]["steps"], 7);
    assert_eq!(summary["config_file"]["estimator"], "sgvb");
}

#[test]
fn config_file_with_unknown_keys_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let config_path = tmp.path().join("bad.json");
    std::fs::write(&config_path, r#"{ "experiment": "noisy-scale", "stepz": 3 }"#).unwrap();
    let out = nesvb(&["run", "--config", config_path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("stepz"), "{}", stderr(&out));
}

#[test]
fn missing_experiment_is_a_usage_error() {
    let out = nesvb(&["run", "--estimator", "sgvb"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--experiment"), "{}", stderr(&out));
}

#[test]
fn reruns_are_byte_identical_apart_from_wall_clock() {
    let tmp = tempfile::tempdir().unwrap();
    let args = |out: &Path| {
        vec![
            "run".to_string(),
            "--experiment".into(),
            "noisy-scale".into(),
            "--estimator".into(),
            "nesvb".into(),
            "--steps".into(),
            "8".into(),
            "--n-seeds".into(),
            "2".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let dir_a = tmp.path().join("a");
    let dir_b = tmp.path().join("b");
    for dir in [&dir_a, &dir_b] {
        let out = Command::new(env!("CARGO_BIN_EXE_nesvb"))
            .args(args(dir))
            .output()
            .expect("binary spawns");
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
    }
    for file in ["trace_seed0.csv", "trace_seed1.csv", "mean_trace.csv"] {
        let a = std::fs::read(dir_a.join("noisy_scale_nesvb").join(file)).unwrap();
        let b = std::fs::read(dir_b.join("noisy_scale_nesvb").join(file)).unwrap();
        assert_eq!(a, b, "{file} must be byte-identical across reruns");
    }
    let strip = |dir: &Path| {
        std::fs::read_to_string(dir.join("noisy_scale_nesvb").join("summary.json"))
            .unwrap()
            .lines()
            .filter(|l| !l.contains("wall_clock_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(&dir_a), strip(&dir_b));
}

#[test]
fn master_seed_changes_results() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |seed: &str, sub: &str| {
        let out = nesvb(&[
            "run",
            "--experiment",
            "noisy-scale",
            "--estimator",
            "sgvb",
            "--steps",
            "8",
            "--n-seeds",
            "1",
            "--master-seed",
            seed,
            "--out",
            tmp.path().join(sub).to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
        std::fs::read_to_string(
            tmp.path().join(sub).join("noisy_scale_sgvb").join("trace_seed0.csv"),
        )
        .unwrap()
    };
    assert_ne!(run("42", "a"), run("7", "b"));
}

#[test]
fn zero_threads_is_a_usage_error() {
    let out = nesvb(&["--threads", "0", "verify", "--quick"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--threads"), "{}", stderr(&out));
}
