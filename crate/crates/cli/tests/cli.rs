use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use drivenbath_cli::config::{parse_text, resolve, Experiment, ExperimentConfig, Table};
use drivenbath_cli::CliError;
use serde_json::Value;
use tempfile::TempDir;

fn bin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_drivenbath")).args(args).output().unwrap()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn validate(experiment: Experiment, text: &str) -> Result<ExperimentConfig, CliError> {
    let explicit = parse_text(text)?;
    ExperimentConfig::from_table(experiment, resolve(explicit.clone()), &explicit, Path::new(""))
}

#[test]
fn empty_file_is_valid_for_copper_estimate() {
    let work = TempDir::new().unwrap();
    let cfg = work.path().join("empty.ini");
    fs::write(&cfg, "").unwrap();
    let out = work.path().join("cu");
    let o = bin(&["copper-estimate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["experiment"], "copper-estimate");
    assert_eq!(m["outputs"][0]["file"], "copper.csv");
    assert_eq!(m["outputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn negative_temperature_names_the_key() {
    let err = validate(Experiment::Kernels, "[thermal]\ntemperature_K = -4\n").unwrap_err();
    assert!(err.to_string().contains("temperature_K"), "{err}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn unknown_keys_are_listed_together() {
    let err = parse_text("[bath]\nmodes = 4\nwidth = 2\n[grid]\nsteps = 3\n").unwrap_err();
    let text = err.to_string();
    assert!(text.contains("bath.width") && text.contains("grid.steps"), "{text}");
    assert!(parse_text("[nowhere]\n").is_err());
    assert!(parse_text("modes = 4\n").is_err());
    assert!(parse_text("[bath]\nmodes = 4\nmodes = 5\n").is_err());
}

#[test]
fn comments_and_blank_lines() {
    let table: Table = parse_text("# header\n\n[bath]\n; note\nmodes = 12 # trailing\n").unwrap();
    assert_eq!(table["bath"]["modes"], "12");
}

#[test]
fn stochastic_experiments_need_a_seed() {
    let err = validate(Experiment::FdrCheck, "").unwrap_err();
    assert!(err.to_string().contains("seed"));
    assert!(validate(Experiment::Kernels, "").is_ok());
    assert!(validate(Experiment::GleRun, "[ensemble]\nseed = 5\n").is_ok());
}

#[test]
fn conflicting_temperature_settings() {
    let err = validate(Experiment::Kernels, "[thermal]\ntemperature_K = 4\nreduced_frequency = 1\n").unwrap_err();
    assert!(err.to_string().contains("mutually exclusive"));
}

#[test]
fn flag_overrides_file_and_is_echoed() {
    let work = TempDir::new().unwrap();
    let cfg = work.path().join("k.ini");
    fs::write(&cfg, "[bath]\nmodes = 8\n[grid]\nduration_s = 1e-12\n").unwrap();
    let out = work.path().join("k");
    let o = bin(&[
        "kernels",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--set",
        "bath.modes=12",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["config"]["bath"]["modes"], "12");
    assert_eq!(m["config"]["output"]["dir"], out.to_str().unwrap());
    assert_eq!(m["metrics"]["modes"], 12.0);
    let bath = fs::read_to_string(out.join("bath.csv")).unwrap();
    assert_eq!(bath.lines().count(), 13);
}

#[test]
fn same_seed_gives_identical_csv() {
    let work = TempDir::new().unwrap();
    let run = |name: &str| {
        let out = work.path().join(name);
        let o = bin(&[
            "fdr-check",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
            "--set",
            "ensemble.realizations=3000",
            "--set",
            "bath.modes=16",
        ]);
        assert!(matches!(o.status.code(), Some(0) | Some(2)));
        (fs::read(out.join("fdr.csv")).unwrap(), String::from_utf8(o.stdout).unwrap())
    };
    let (a, summary) = run("a");
    let (b, _) = run("b");
    assert_eq!(a, b);
    assert!(String::from_utf8(a).unwrap().starts_with("lag_s,estimate,stderr,analytic,z\n"));
    assert!(summary.contains("max |z|") && summary.contains("status:"));
}

#[test]
fn oracle_compare_writes_both_trajectories() {
    let work = TempDir::new().unwrap();
    let out = work.path().join("o");
    let o = bin(&[
        "oracle-compare",
        "--seed",
        "2",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "bath.modes=8",
        "--set",
        "grid.duration_s=5e-13",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["gle_trajectory.csv", "oracle_trajectory.csv", "comparison.csv", "bath.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(manifest(&out)["metrics"]["max_relative_deviation"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn numerical_failure_removes_outputs() {
    let work = TempDir::new().unwrap();
    let out = work.path().join("unstable");
    // An electron-mass particle on this bath is far stiffer than the step resolves.
    let o = bin(&[
        "gle-run",
        "--seed",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--set",
        "particle.mass_kg=9.1e-31",
        "--set",
        "grid.duration_s=5e-12",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!out.exists());
}

#[test]
fn check_failure_exits_2_and_keeps_the_manifest() {
    let work = TempDir::new().unwrap();
    let out = work.path().join("n");
    let o = bin(&["nyquist", "--out", out.to_str().unwrap(), "--set", "circuit.tolerance=1e-9"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(manifest(&out)["status"], "fail");
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(bin(&["no-such-experiment"]).status.code(), Some(1));
    assert_eq!(bin(&["kernels", "--threads", "zero"]).status.code(), Some(1));
    assert_eq!(bin(&["kernels", "--set", "bath.bogus=1"]).status.code(), Some(1));
    assert_eq!(bin(&["--help"]).status.code(), Some(0));
}
