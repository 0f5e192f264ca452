//! End-to-end tests of the command-line interface: exit codes, output
//! contracts, stream separation.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const TINY_CONFIG: &str = r#"
master_seed = 5
trials = 2

[architecture]
streams = 2
tx_layers = 1
rx_layers = 1
tx_atoms = 9
rx_atoms = 9

[optimizer]
starts = 2
max_iterations = 6

[sweep]
variable = "layers"
values = [1, 2]
"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sim-hmimo"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("config.toml");
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).env_remove("SIM_HMIMO_THREADS").output().unwrap()
}

#[test]
fn missing_config_exits_1_naming_the_path() {
    let out = run(&["sweep", "--config", "/nonexistent/nowhere.toml"]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("/nonexistent/nowhere.toml"), "stderr: {stderr}");
    assert!(out.stdout.is_empty());
}

#[test]
fn degenerate_architecture_exits_1_citing_the_invariant() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[architecture]
streams = 5
tx_atoms = 4
rx_atoms = 4
"#,
    );
    let out = run(&["fit", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("stream count"), "stderr: {stderr}");
}

#[test]
fn sweep_emits_contract_csv_on_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_CONFIG);
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut lines = stdout.lines();
    assert_eq!(
        lines.next().unwrap(),
        "sweep_value,trial,seed,nmse,sim_capacity,ideal_capacity,bound_lower,bound_upper,ber,iterations,wall_time_ms"
    );
    // 2 sweep points x (2 trials + mean + std)
    assert_eq!(lines.count(), 8);
}

#[test]
fn json_mode_emits_parseable_lines() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_CONFIG);
    let out = run(&["bounds", "--config", config.to_str().unwrap(), "--json", "--trials", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let mut rows = 0;
    for line in stdout.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("sweep_value").is_some());
        assert!(v.get("ideal_capacity").is_some());
        rows += 1;
    }
    assert_eq!(rows, 2 * (3 + 2));
}

#[test]
fn fit_writes_trace_and_keeps_summary_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_CONFIG);
    let out_path = dir.path().join("trace.csv");
    let out = run(&[
        "fit",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty(), "results must go to --out only");
    let text = std::fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with("iteration,loss\n"));
    assert!(text.lines().count() >= 2);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("nmse"), "stderr: {stderr}");
}

#[test]
fn trials_and_threads_flags_are_validated() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_CONFIG);
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--trials", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["sweep", "--config", config.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let out = bin()
        .args(["sweep", "--config", config.to_str().unwrap()])
        .env("SIM_HMIMO_THREADS", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn threads_env_var_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), TINY_CONFIG);
    let out = bin()
        .args(["sweep", "--config", config.to_str().unwrap(), "--trials", "2"])
        .env("SIM_HMIMO_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn baseline_subcommand_produces_capacity_rows() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"
trials = 3

[architecture]
streams = 2

[sweep]
variable = "distance"
values = [100, 250]

[baseline]
tx_antennas = 8
rx_antennas = 8
"#,
    );
    let out = run(&["baseline", "--config", config.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let data_line = stdout.lines().nth(1).unwrap();
    let fields: Vec<&str> = data_line.split(',').collect();
    assert_eq!(fields[3], "", "baseline has no nmse");
    assert!(!fields[5].is_empty(), "baseline must fill ideal_capacity");
}

#[test]
fn shipped_presets_parse() {
    let presets = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets");
    let mut seen = 0;
    for entry in std::fs::read_dir(presets).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let text = std::fs::read_to_string(&path).unwrap();
            sim_hmimo::harness::ExperimentConfig::from_toml_str(&text)
                .unwrap_or_else(|e| panic!("{} failed to parse: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4, "expected shipped presets, found {seen}");
}
