//! End-to-end exercise of the `denne` binary: synth → perturb → train →
//! eval → report from one config file, plus error-path checks.

use std::path::Path;
use std::process::{Command, Output};

fn denne(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_denne"))
        .args(args)
        .output()
        .expect("failed to spawn denne")
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("run");
    let text = format!(
        r#"
output_dir = "{}"
seed = 11

[dataset]
kind = "partition"
n = 48
k = 4
p_in = 0.35
p_out = 0.04

[noise]
add_ratio = 0.05

[model]
dim = 8
epochs = 1

[walk]
walks_per_node = 2
walk_length = 20
window = 3

[eval]
fractions = [0.5]
nc_seeds = 2
ratios = [0.01, 0.02]
"#,
        out.display()
    );
    let path = dir.join("experiment.toml");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn pipeline_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let config = config.to_str().unwrap();
    let out_dir = dir.path().join("run");

    let synth = denne(&["synth", "partition", "--config", config]);
    assert!(synth.status.success(), "{synth:?}");
    assert!(out_dir.join("edges.txt").exists());
    assert!(out_dir.join("groups.txt").exists());

    // Declared kind must match the config.
    let mismatch = denne(&["synth", "geometric", "--config", config]);
    assert!(!mismatch.status.success());
    assert!(String::from_utf8_lossy(&mismatch.stderr).starts_with("error: config:"));

    assert!(denne(&["perturb", "--config", config]).status.success());
    assert!(out_dir.join("observed.txt").exists());
    assert!(out_dir.join("delta.txt").exists());

    assert!(denne(&["train", "--config", config]).status.success());
    assert!(out_dir.join("embeddings.txt").exists());
    assert!(out_dir.join("noise.txt").exists());
    assert!(out_dir.join("train_report.csv").exists());

    assert!(denne(&["eval", "nc", "--config", config]).status.success());
    assert!(denne(&["eval", "gr", "--config", config]).status.success());
    let nc = out_dir.join("metrics_nc.csv");
    let gr = out_dir.join("metrics_gr.csv");
    let report = dir.path().join("merged.csv");
    let merged = denne(&[
        "report",
        nc.to_str().unwrap(),
        gr.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(merged.status.success(), "{merged:?}");
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.starts_with("variant,dataset,fraction_or_ratio,seed,metric,value\n"));
    assert!(text.contains(",mean,"));
    assert!(text.contains("macro_f1"));
    assert!(text.contains("reconstruction_f1"));
}

#[test]
fn variant_and_seed_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let config = config.to_str().unwrap();
    let alt = dir.path().join("alt");
    let alt_s = alt.to_str().unwrap().to_string();

    assert!(denne(&["synth", "--config", config, "--out", &alt_s, "--seed", "99"])
        .status
        .success());
    let train = denne(&[
        "train", "--config", config, "--out", &alt_s, "--seed", "99", "--variant", "adap",
    ]);
    assert!(train.status.success(), "{train:?}");
    let manifest = std::fs::read_to_string(alt.join("manifest.toml")).unwrap();
    assert!(manifest.contains("variant = \"adap\""));
    assert!(manifest.contains("seed = 99"));
    let dump = std::fs::read_to_string(alt.join("noise.txt")).unwrap();
    assert!(dump.contains("%mixture"));
}

#[test]
fn missing_config_reports_io_category() {
    let out = denne(&["train", "--config", "/nonexistent/experiment.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: io:"));
}

#[test]
fn bad_variant_reports_config_category() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let out = denne(&["train", "--config", config.to_str().unwrap(), "--variant", "bogus"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error: config:"));
}
