use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fhnlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fhnlab")).args(args).output().expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("fhnlab-test-{}-{name}", std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("experiment.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

const TOY: &str = r#"
[model]
kind = "toy_nonlinear"
alpha = 1.0

[sim]
nodes = 51
dt = 1e-5
t_end = 0.05
record_every = 100
probes = [0.02]

[ic]
type = "step_pair"
left = 1.0
right = -0.5
"#;

#[test]
fn missing_config_exits_2() {
    let out = fhnlab(&["simulate", "--config", "/nonexistent/experiment.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "config");
}

#[test]
fn malformed_config_exits_2() {
    let dir = scratch("malformed");
    let cfg = write_config(&dir, &TOY.replace("alpha = 1.0", "alpha = 1.0\ngamma = 3"));
    let out = fhnlab(&["simulate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["error"], "parse");
}

#[test]
fn guard_violation_exits_3_before_stepping() {
    let dir = scratch("guard");
    let cfg = write_config(&dir, &TOY.replace("dt = 1e-5", "dt = 1e-2"));
    let out_dir = dir.join("out");
    let out = fhnlab(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(stderr_json(&out)["error"], "guard");
    assert!(!out_dir.join("diagnostics.csv").exists());
}

#[test]
fn blow_up_exits_4() {
    let dir = scratch("blowup");
    let cfg = write_config(&dir, &TOY.replace("left = 1.0", "left = 1e6"));
    let out = fhnlab(&["simulate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(stderr_json(&out)["error"], "blow_up");
}

#[test]
fn simulate_writes_artifacts_deterministically() {
    let dir = scratch("determinism");
    let cfg = write_config(&dir, TOY);
    let mut csvs = Vec::new();
    for run in ["a", "b"] {
        let out_dir = dir.join(run);
        let out = fhnlab(&["simulate", "--config", &cfg, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let summary = stdout_json(&out);
        assert!((summary["t_final"].as_f64().unwrap() - 0.05).abs() < 1e-12);
        csvs.push([
            fs::read(out_dir.join("snapshots.csv")).unwrap(),
            fs::read(out_dir.join("diagnostics.csv")).unwrap(),
        ]);
    }
    assert_eq!(csvs[0], csvs[1]);
    let text = String::from_utf8(csvs[0][1].clone()).unwrap();
    assert!(text.starts_with("# fhnlab "));
}

#[test]
fn seed_flag_changes_random_data_only_through_the_seed() {
    let dir = scratch("seed");
    let text = TOY.replace(
        "type = \"step_pair\"\nleft = 1.0\nright = -0.5",
        "type = \"random\"\nseed = 1\nmax_mode = 3",
    );
    let cfg = write_config(&dir, &text);
    let read = |seed: &str, sub: &str| {
        let out_dir = dir.join(sub);
        let out = fhnlab(&["simulate", "--config", &cfg, "--seed", seed, "--out", out_dir.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        fs::read(out_dir.join("final_state.csv")).unwrap()
    };
    assert_eq!(read("5", "a"), read("5", "b"));
    assert_ne!(read("5", "a"), read("6", "c"));
}

#[test]
fn unknown_preset_exits_2() {
    let dir = scratch("preset");
    let out = fhnlab(&["reproduce", "fig9", "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn planar_presets_pass_and_repeat_identically() {
    let dir = scratch("ode");
    let first = dir.join("a");
    let second = dir.join("b");
    for d in [&first, &second] {
        let out = fhnlab(&["reproduce", "ode_c0", "--out", d.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout_json(&out)["pass"], true);
    }
    assert_eq!(fs::read(first.join("ode.csv")).unwrap(), fs::read(second.join("ode.csv")).unwrap());
    let out = fhnlab(&["reproduce", "ode_c-1.5", "--out", dir.join("c").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
}

const SPECTRUM: &str = r#"
[model]
kind = "const_c_fhn"
c = { type = "constant", value = 0.0 }

[sim]
nodes = 401

[spectrum]
n_modes = 6
"#;

#[test]
fn spectrum_of_constant_potential() {
    let dir = scratch("spectrum");
    let cfg = write_config(&dir, SPECTRUM);
    let out = fhnlab(&["spectrum", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    assert!((summary["lambda_0"].as_f64().unwrap() + 3.0).abs() < 1e-8);
    assert!(dir.join("spectrum.csv").exists() && dir.join("eigenfunctions.csv").exists());
}

#[test]
fn spectrum_with_no_modes_exits_2() {
    let dir = scratch("spectrum0");
    let cfg = write_config(&dir, &SPECTRUM.replace("n_modes = 6", "n_modes = 0"));
    let out = fhnlab(&["spectrum", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

const SWEEP: &str = r#"
[model]
kind = "toy_linear"

[bifurcate]
parameter = "alpha"
lo = -1.0
hi = 50.0
samples = 52
k_max = 5
"#;

#[test]
fn alpha_sweep_reports_crossings_at_the_eigenvalues() {
    let dir = scratch("sweep");
    let cfg = write_config(&dir, SWEEP);
    let out = fhnlab(&["bifurcate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = stdout_json(&out);
    let crossings: Vec<f64> = summary["crossings"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["parameter"].as_f64().unwrap())
        .collect();
    let pi2 = std::f64::consts::PI.powi(2);
    let expected = [0.0, pi2, 4.0 * pi2];
    assert_eq!(crossings.len(), expected.len(), "{crossings:?}");
    for (c, e) in crossings.iter().zip(expected) {
        assert!((c - e).abs() < 1e-9, "{c} vs {e}");
    }
    let rows = fs::read_to_string(dir.join("cascade.csv")).unwrap();
    assert_eq!(rows.lines().filter(|l| !l.starts_with('#')).count(), 1 + 52 * 6);
}

#[test]
fn single_sample_sweep_has_no_crossing() {
    let dir = scratch("single");
    let cfg = write_config(&dir, &SWEEP.replace("samples = 52", "samples = 1"));
    let out = fhnlab(&["bifurcate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let summary = stdout_json(&out);
    assert_eq!(summary["crossings"].as_array().unwrap().len(), 0);
    assert_eq!(summary["unstable_counts"].as_array().unwrap().len(), 1);
}

#[test]
fn p_star_bracket_without_sign_change_exits_6() {
    let dir = scratch("pstar");
    let text = r#"
[model]
kind = "nh_fhn"
epsilon = 0.1
a = -50.0
b = 50.0
c = { type = "well", p = 1.0 }

[sim]
nodes = 201

[bifurcate]
parameter = "p"
lo = 0.5
hi = 0.6
samples = 2
k_max = 2
find_p_star = true
"#;
    let cfg = write_config(&dir, text);
    let out = fhnlab(&["bifurcate", "--config", &cfg, "--out", dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(6), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(stderr_json(&out)["error"], "invalid_bracket");
}

#[test]
fn verify_lemmas_passes_and_unknown_suite_is_rejected() {
    let out = fhnlab(&["verify", "lemmas"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(stdout_json(&out)["pass"], true);
    let out = fhnlab(&["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
}
