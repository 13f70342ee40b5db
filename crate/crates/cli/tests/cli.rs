//! End-to-end tests of the `hamdesc` binary: exit codes, artifact files,
//! CSV schema, and seed reproducibility. Each test gets its own temp
//! directory for configs and outputs.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hamdesc"))
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).expect("write config");
    path
}

fn run_cmd(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn hamdesc")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("process was signalled")
}

fn stderr_text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn read_json(path: &Path) -> Value {
    let text = fs::read_to_string(path).expect("read json artifact");
    serde_json::from_str(&text).expect("parse json artifact")
}

/// Column values of a trajectory CSV, keyed by header name.
fn csv_column(path: &Path, column: &str) -> Vec<f64> {
    let text = fs::read_to_string(path).expect("read csv");
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().expect("csv header").split(',').collect();
    let idx = header
        .iter()
        .position(|&h| h == column)
        .unwrap_or_else(|| panic!("column {column} not in header {header:?}"));
    lines
        .map(|l| {
            l.split(',').nth(idx).expect("row shorter than header").parse::<f64>().unwrap()
        })
        .collect()
}

#[test]
fn run_reproduces_method_ordering() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quartic2d"},
            "kinetic": {"a": 1.3333333333333333, "A": 1.3333333333333333, "q": 1.3333333333333333},
            "methods": ["explicit1", "momentum", "gd"],
            "epsilon": 0.010416666666666666,
            "gamma": 0.5,
            "x0": [1.0, 1.0],
            "max_iters": 10000,
            "record_stride": 1000
        }"#,
    );
    let out = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    for name in ["explicit1.csv", "momentum.csv", "gd.csv", "summary.json"] {
        assert!(dir.path().join(name).exists(), "missing artifact {name}");
    }
    let summary = read_json(&dir.path().join("summary.json"));
    let methods = summary["methods"].as_array().unwrap();
    assert_eq!(methods.len(), 3);
    let final_of = |name: &str| -> f64 {
        methods
            .iter()
            .find(|m| m["method"] == name)
            .unwrap_or_else(|| panic!("{name} missing from summary"))["final_suboptimality"]
            .as_f64()
            .unwrap()
    };
    let (ex1, mom, gd) = (final_of("explicit1"), final_of("momentum"), final_of("gd"));
    assert!(
        ex1 < mom && mom < gd,
        "finals not ordered: explicit1 {ex1:.3e}, momentum {mom:.3e}, gd {gd:.3e}"
    );
}

#[test]
fn run_rejects_empty_method_list() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quartic2d"},
            "kinetic": {"classical": true},
            "methods": [],
            "epsilon": 0.01,
            "gamma": 0.5,
            "x0": [1.0, 1.0]
        }"#,
    );
    let out = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("methods list is empty"));
}

#[test]
fn run_auto_step_on_certified_pairing_is_monotone() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "power1d", "params": {"b": 4.0}},
            "kinetic": {"a": 1.3333333333333333, "A": 1.3333333333333333},
            "methods": ["implicit"],
            "epsilon": "auto",
            "gamma": 0.5,
            "x0": [1.0],
            "max_iters": 10000,
            "stop": {"subopt_tol": 1e-10}
        }"#,
    );
    let out = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let summary = read_json(&dir.path().join("summary.json"));
    let method = &summary["methods"][0];
    assert_eq!(method["method"], "implicit");
    // Auto resolves to 0.9 of the certified bound (0.25 for this pairing).
    let eps = method["epsilon"].as_f64().unwrap();
    assert!((eps - 0.075).abs() <= 1e-12, "auto epsilon {eps} != 0.075");
    assert_eq!(method["h_monotone"], Value::Bool(true));
    assert!(method["stop_cause"].as_str().unwrap().starts_with("subopt-tol@"));
}

#[test]
fn run_same_seed_reproduces_csv_bytes() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quadratic", "params": {"eigenvalues": [0.1, 1.0, 10.0]}},
            "kinetic": {"classical": true},
            "methods": ["implicit"],
            "epsilon": "auto",
            "gamma": 0.5,
            "x0": [1.0, 1.0, 1.0],
            "max_iters": 200
        }"#,
    );
    let run_with = |out_name: &str, seed: &str| -> Vec<u8> {
        let out_dir = dir.path().join(out_name);
        let out = run_cmd(&[
            "run",
            "--config",
            config.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            seed,
            "--quiet",
        ]);
        assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));
        assert!(out.stdout.is_empty(), "--quiet still printed: {:?}", out.stdout);
        fs::read(out_dir.join("implicit.csv")).expect("trajectory csv")
    };

    let first = run_with("a", "7");
    let second = run_with("b", "7");
    assert_eq!(first, second, "same seed must reproduce the CSV byte for byte");
    let other = run_with("c", "8");
    assert_ne!(first, other, "a different seed must rotate the synthesized matrix");

    // Shared trajectory schema: metadata columns then positions then momenta.
    let text = String::from_utf8(first).unwrap();
    let header = text.lines().next().unwrap();
    assert_eq!(header, "iter,t,subopt,H,V,x_0,x_1,x_2,p_0,p_1,p_2");
}

#[test]
fn run_auto_step_without_certified_bound_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quartic2d"},
            "kinetic": {"classical": true},
            "methods": ["gd"],
            "epsilon": "auto",
            "gamma": 0.5,
            "x0": [1.0, 1.0]
        }"#,
    );
    let out = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("no certified step-size bound"));
}

#[test]
fn run_dimension_mismatch_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quartic2d"},
            "kinetic": {"classical": true},
            "methods": ["gd"],
            "epsilon": 0.01,
            "gamma": 0.5,
            "x0": [1.0]
        }"#,
    );
    let out = run_cmd(&[
        "run",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("x0 has length 1"));
}

#[test]
fn rates_reports_certified_bounds() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "power1d", "params": {"b": 2.0}},
            "kinetic": {"classical": true},
            "gamma": 0.5
        }"#,
    );
    let out = run_cmd(&[
        "rates",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let report = read_json(&dir.path().join("rates.json"));
    assert_eq!(report["constants"]["c_alpha_gamma"].as_f64().unwrap(), 0.5);
    assert_eq!(report["constants"]["c_fk"].as_f64().unwrap(), 1.0);
    let methods = report["methods"].as_array().unwrap();
    let implicit = methods
        .iter()
        .find(|m| m["method"] == "implicit")
        .expect("implicit covered for this pairing");
    let eps_max = implicit["epsilon_max"].as_f64().unwrap();
    let eps_auto = implicit["epsilon_auto"].as_f64().unwrap();
    assert!((eps_max - 0.25).abs() <= 1e-12, "implicit bound {eps_max} != 0.25");
    assert!((eps_auto - 0.225).abs() <= 1e-12, "auto step {eps_auto} != 0.225");
    assert_eq!(implicit["factor_form"], "divide");
    assert!(implicit["lambda_star"].as_f64().unwrap() > 0.0);
}

#[test]
fn rates_with_uncovered_method_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "power1d", "params": {"b": 2.0}},
            "kinetic": {"classical": true},
            "methods": ["gd"],
            "gamma": 0.5
        }"#,
    );
    let out = run_cmd(&[
        "rates",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("no certified bound"));
}

#[test]
fn rates_with_quadratic_kinetic_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "power1d", "params": {"b": 2.0}},
            "kinetic": {"quadratic": [[1.0]]},
            "gamma": 0.5
        }"#,
    );
    let out = run_cmd(&[
        "rates",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("power kinetics only"));
}

#[test]
fn ode_zero_horizon_emits_single_row() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "power1d", "params": {"b": 2.0}},
            "kinetic": {"classical": true},
            "gamma": 0.5,
            "x0": [1.0],
            "t_end": 0.0
        }"#,
    );
    let out = run_cmd(&[
        "ode",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let report = read_json(&dir.path().join("ode.json"));
    assert_eq!(report["samples"].as_u64().unwrap(), 1);
    let csv = fs::read_to_string(dir.path().join("ode.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "expected header plus exactly one row");
}

#[test]
fn ode_damped_quadratic_has_nonincreasing_energy() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quadratic", "params": {"matrix": [[1.0]]}},
            "kinetic": {"classical": true},
            "gamma": 0.5,
            "x0": [1.0],
            "t_end": 10.0
        }"#,
    );
    let out = run_cmd(&[
        "ode",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let h = csv_column(&dir.path().join("ode.csv"), "H");
    assert!(h.len() > 10, "expected a sampled trajectory, got {} rows", h.len());
    for w in h.windows(2) {
        assert!(w[1] <= w[0] + 1e-9, "H rose from {} to {}", w[0], w[1]);
    }
}

#[test]
fn ode_blowup_is_a_solver_failure() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "power1d", "params": {"b": 4.0}},
            "kinetic": {"classical": true},
            "gamma": 0.5,
            "x0": [1e200],
            "t_end": 1.0
        }"#,
    );
    let out = run_cmd(&[
        "ode",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 3);
    assert!(stderr_text(&out).contains("stiff"));
}

#[test]
fn lower_generic_fits_the_predicted_exponent() {
    let dir = TempDir::new().unwrap();
    let out = run_cmd(&[
        "lower",
        "--a",
        "2",
        "--b",
        "4",
        "--gamma",
        "1",
        "--mode",
        "generic",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let report = read_json(&dir.path().join("lower.json"));
    assert_eq!(report["sublinear_regime"], Value::Bool(true));
    assert!((report["predicted_exponent"].as_f64().unwrap() - 0.5).abs() <= 1e-12);
    assert_eq!(report["fit"]["kind"], "sublinear");
    let power = report["fit"]["power"].as_f64().unwrap();
    assert!((power - 0.5).abs() <= 0.05, "fitted power {power} misses 0.5 by > 0.05");
    assert!(dir.path().join("lower.csv").exists());
}

#[test]
fn lower_linear_regime_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let out = run_cmd(&[
        "lower",
        "--a",
        "2",
        "--b",
        "2",
        "--gamma",
        "1",
        "--mode",
        "generic",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("linearly"));
}

#[test]
fn lower_eta_brackets_the_critical_height() {
    let dir = TempDir::new().unwrap();
    let out = run_cmd(&[
        "lower",
        "--a",
        "2",
        "--b",
        "4",
        "--gamma",
        "1",
        "--mode",
        "eta",
        "--tol",
        "1e-4",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let report = read_json(&dir.path().join("lower.json"));
    let eta = report["eta"].as_f64().unwrap();
    assert!((1.168..=1.173).contains(&eta), "eta {eta} outside the known range");
    let bracket = report["eta_bracket"].as_array().unwrap();
    let width = bracket[1].as_f64().unwrap() - bracket[0].as_f64().unwrap();
    assert!(width <= 1e-4 * eta, "bracket width {width:.2e} exceeds tol * eta");
    assert_eq!(report["fit"]["kind"], "linear");
    let rate = report["fit"]["rate"].as_f64().unwrap();
    assert!((0.85..=1.1).contains(&rate), "critical-path rate {rate} not near 1");
}

#[test]
fn lower_sweep_emits_phase_samples() {
    let dir = TempDir::new().unwrap();
    let out = run_cmd(&[
        "lower",
        "--a",
        "2",
        "--b",
        "4",
        "--gamma",
        "1",
        "--mode",
        "sweep",
        "--theta-count",
        "3",
        "--t-end",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let text = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "theta,t,x,p");
    let mut thetas: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    thetas.dedup();
    assert_eq!(thetas.len(), 3, "expected samples from exactly three starts");
}

#[test]
fn compare_tabulates_iterations_to_tolerance() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "normFour"},
            "kinetic": {"a": 2.0, "A": 2.0, "q": 1.3333333333333333},
            "methods": ["explicit1"],
            "epsilon": 0.002,
            "gamma": 0.5,
            "max_iters": 100000,
            "record_stride": 100000,
            "stop": {"subopt_tol": 1e-6},
            "dims": [2, 10]
        }"#,
    );
    let out = run_cmd(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", stderr_text(&out));

    let report = read_json(&dir.path().join("compare.json"));
    let table = report["table"].as_array().unwrap();
    assert_eq!(table.len(), 2);
    for entry in table {
        assert_eq!(entry["reached"], Value::Bool(true));
        assert!(entry["iterations"].as_u64().unwrap() > 0);
    }
    let csv = fs::read_to_string(dir.path().join("compare.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "dim,method,epsilon,iterations,reached");
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn compare_conflicting_dims_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "quartic2d"},
            "kinetic": {"classical": true},
            "methods": ["gd"],
            "epsilon": 0.01,
            "gamma": 0.5,
            "stop": {"subopt_tol": 1e-6},
            "dims": [2, 3]
        }"#,
    );
    let out = run_cmd(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("conflicting"));
}

#[test]
fn compare_without_tolerance_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "objective": {"name": "normFour"},
            "kinetic": {"classical": true},
            "methods": ["gd"],
            "epsilon": 0.01,
            "gamma": 0.5,
            "dims": [2]
        }"#,
    );
    let out = run_cmd(&[
        "compare",
        "--config",
        config.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(exit_code(&out), 2);
    assert!(stderr_text(&out).contains("subopt_tol"));
}
