use std::path::{Path, PathBuf};
use std::process::Command;

use qstab::cli::format::{emit_model, parse_model_str, ReportFile};
use qstab::model::{DensityOperator, TargetSpec};
use qstab::simulate::state_metrics;
use serde_json::{json, Value};
use tempfile::TempDir;

const FIXTURES: [&str; 5] = ["example1", "example2", "example3", "example3_no_control", "example4"];

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(format!("{name}.json"))
}

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn qstab(args: &[&str]) -> Run {
    let out = Command::new(env!("CARGO_BIN_EXE_qstab")).args(args).output().expect("binary runs");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8_lossy(&out.stdout).into_owned(),
        stderr: String::from_utf8_lossy(&out.stderr).into_owned(),
    }
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn read_report(p: &Path) -> ReportFile {
    ReportFile::from_json(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn write_json(dir: &TempDir, name: &str, v: &Value) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn matrix_json(rows: &[&[(f64, f64)]]) -> Value {
    Value::Array(rows.iter().map(|r| Value::Array(r.iter().map(|&(a, b)| json!([a, b])).collect())).collect())
}

fn qubit_model(h: Value, noise: Value, measurement: Option<Value>, target: Value) -> Value {
    let mut v = json!({
        "format_version": "1.0",
        "dim": 2,
        "hamiltonian": h,
        "noise": noise,
        "target": target,
    });
    if let Some(m) = measurement {
        v["measurement"] = m;
    }
    v
}

fn zero2() -> Value {
    matrix_json(&[&[(0.0, 0.0), (0.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]])
}

fn sigma_plus() -> Value {
    matrix_json(&[&[(0.0, 0.0), (1.0, 0.0)], &[(0.0, 0.0), (0.0, 0.0)]])
}

fn max_entry(m: &[Vec<[f64; 2]>], reference: &[[f64; 2]]) -> f64 {
    m.iter()
        .flatten()
        .zip(reference)
        .map(|(a, b)| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt())
        .fold(0.0, f64::max)
}

#[test]
fn synthesize_example1_then_analyze_closed_loop() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("s.json");
    let closed = dir.path().join("closed.json");
    let r = qstab(&[
        "synthesize",
        "--model",
        path_str(&fixture("example1")),
        "--out-report",
        path_str(&report),
        "--out-model",
        path_str(&closed),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = read_report(&report);
    assert_eq!(rep.verdicts.feasible, Some(true));
    assert_eq!(rep.exit_code, 0);
    // F = -σ_y/2, H_c = -0.6 σ_x + 0.35 σ_y
    let f = rep.operators.feedback.unwrap();
    assert!(max_entry(&f, &[[0.0, 0.0], [0.0, 0.5], [0.0, -0.5], [0.0, 0.0]]) <= 1e-12);
    let hc = rep.operators.h_c.unwrap();
    assert!(max_entry(&hc, &[[0.0, 0.0], [-0.6, -0.35], [-0.6, 0.35], [0.0, 0.0]]) <= 1e-12);

    let analyze_report = dir.path().join("a.json");
    let a = qstab(&["analyze", "--model", path_str(&closed), "--out-report", path_str(&analyze_report)]);
    assert_eq!(a.code, 0, "{}{}", a.stdout, a.stderr);
    let rep = read_report(&analyze_report);
    assert_eq!(rep.verdicts.invariant, Some(true));
    assert_eq!(rep.verdicts.attractive, Some(true));
    assert_eq!(rep.verdicts.unique_steady_state, Some(true));
    assert!(rep.spectrum.unwrap().len() == 4);
}

#[test]
fn uncontrolled_bell_target_is_invariant_only() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let r = qstab(&["analyze", "--model", path_str(&fixture("example3_no_control")), "--out-report", path_str(&report)]);
    assert_eq!(r.code, 2, "{}", r.stderr);
    let rep = read_report(&report);
    assert_eq!(rep.verdicts.invariant, Some(true));
    assert_eq!(rep.verdicts.attractive, Some(false));
    assert_eq!(rep.witnesses.h_r_prime.as_ref().unwrap().len(), 2);
    assert_eq!(rep.witnesses.obstruction.as_ref().unwrap().len(), 2);
    assert_eq!(rep.exit_code, 2);
}

#[test]
fn target_that_leaks_is_not_invariant() {
    let dir = TempDir::new().unwrap();
    let sx = matrix_json(&[&[(0.0, 0.0), (1.0, 0.0)], &[(1.0, 0.0), (0.0, 0.0)]]);
    let model = qubit_model(sx, json!([]), None, json!({"kind": "pure_state", "payload": [[1.0, 0.0], [0.0, 0.0]]}));
    let path = write_json(&dir, "m.json", &model);
    let report = dir.path().join("r.json");
    let r = qstab(&["analyze", "--model", path_str(&path), "--out-report", path_str(&report)]);
    assert_eq!(r.code, 3);
    let rep = read_report(&report);
    assert_eq!(rep.verdicts.invariant, Some(false));
    assert_eq!(rep.verdicts.attractive, None);
    assert!(rep.residuals["interplay"] > 0.5);
    assert!(r.stdout.contains("interplay residual"));
}

#[test]
fn equatorial_target_with_sigma_plus_is_infeasible() {
    let dir = TempDir::new().unwrap();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let model = qubit_model(
        zero2(),
        json!([]),
        Some(sigma_plus()),
        json!({"kind": "pure_state", "payload": [[s, 0.0], [s, 0.0]]}),
    );
    let path = write_json(&dir, "m.json", &model);
    let report = dir.path().join("r.json");
    let r = qstab(&["synthesize", "--model", path_str(&path), "--out-report", path_str(&report)]);
    assert_eq!(r.code, 4);
    let rep = read_report(&report);
    assert_eq!(rep.verdicts.feasible, Some(false));
    let why = rep.infeasibility.unwrap();
    assert_eq!(why.code, "target_commutes_with_measurement");
    assert!(why.reason.contains("commutes with the measured observable"));
    assert!(r.stdout.contains("infeasible"));
}

#[test]
fn synthesize_example4_reproduces_published_controls() {
    let dir = TempDir::new().unwrap();
    let report = dir.path().join("r.json");
    let r = qstab(&["synthesize", "--model", path_str(&fixture("example4")), "--out-report", path_str(&report)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = read_report(&report);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    // J_zJ_y + J_yJ_z and J_z in the (|00⟩, Ψ+, |11⟩) basis
    let f = [[0.0, 0.0], [0.0, -s], [0.0, 0.0], [0.0, s], [0.0, 0.0], [0.0, s], [0.0, 0.0], [0.0, -s], [0.0, 0.0]];
    assert!(max_entry(&rep.operators.feedback.unwrap(), &f) <= 1e-12);
    let jz = [[1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [-1.0, 0.0]];
    assert!(max_entry(&rep.operators.h_c.unwrap(), &jz) <= 1e-12);
}

fn closed_loop(dir: &TempDir, name: &str) -> PathBuf {
    let out = dir.path().join(format!("{name}-closed.json"));
    let r = qstab(&["synthesize", "--model", path_str(&fixture(name)), "--out-model", path_str(&out)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    out
}

#[test]
fn simulate_example1_closed_loop_reaches_target() {
    let dir = TempDir::new().unwrap();
    let model = closed_loop(&dir, "example1");
    let csv_path = dir.path().join("t.csv");
    let report = dir.path().join("r.json");
    let r = qstab(&[
        "simulate",
        "--model",
        path_str(&model),
        "--T",
        "40",
        "--steps",
        "41",
        "--ensemble",
        "20",
        "--seed",
        "5",
        "--out-csv",
        path_str(&csv_path),
        "--out-report",
        path_str(&report),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = read_report(&report);
    let m = rep.metrics.unwrap();
    assert_eq!(m.final_fidelity.len(), 20);
    assert!(m.final_fidelity.iter().all(|f| *f >= 1.0 - 1e-6));
    assert!((m.convergence_rate.unwrap() - 0.5).abs() <= 1e-9);
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    assert_eq!(reader.headers().unwrap(), vec!["t", "V", "fidelity", "purity", "trajectory_id"]);
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 20 * 41);
    assert_eq!(&rows[41][4], "1");
}

#[test]
fn simulate_example2_closed_loop_empties_complement() {
    let dir = TempDir::new().unwrap();
    let model = closed_loop(&dir, "example2");
    let report = dir.path().join("r.json");
    let r = qstab(&["simulate", "--model", path_str(&model), "--ensemble", "5", "--out-report", path_str(&report)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let m = read_report(&report).metrics.unwrap();
    assert!(m.final_v.iter().all(|v| *v <= 1e-6));
}

#[test]
fn simulate_single_step_reports_initial_metrics() {
    let dir = TempDir::new().unwrap();
    let csv_path = dir.path().join("t.csv");
    let r = qstab(&[
        "simulate",
        "--model",
        path_str(&fixture("example4")),
        "--T",
        "0",
        "--steps",
        "1",
        "--seed",
        "9",
        "--out-csv",
        path_str(&csv_path),
    ]);
    assert_eq!(r.code, 2, "a random state is not yet on the target");
    let mut reader = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 1);
    let parsed = parse_model_str(&std::fs::read_to_string(fixture("example4")).unwrap()).unwrap();
    let expected = state_metrics(0.0, &DensityOperator::random(3, 9).unwrap(), &parsed.target).unwrap();
    assert_eq!(rows[0][0].parse::<f64>().unwrap(), 0.0);
    assert_eq!(rows[0][1].parse::<f64>().unwrap(), expected.v);
    assert_eq!(rows[0][2].parse::<f64>().unwrap(), expected.fidelity);
    assert_eq!(rows[0][3].parse::<f64>().unwrap(), expected.purity);
}

#[test]
fn dimension_above_limit_is_an_input_error() {
    let dir = TempDir::new().unwrap();
    let n = 65;
    let zero: Vec<Vec<[f64; 2]>> = vec![vec![[0.0, 0.0]; n]; n];
    let mut target = vec![[0.0, 0.0]; n];
    target[0] = [1.0, 0.0];
    let model = json!({
        "format_version": "1.0",
        "dim": n,
        "hamiltonian": zero,
        "target": {"kind": "pure_state", "payload": target},
    });
    let path = write_json(&dir, "big.json", &model);
    for args in [vec!["simulate", "--model", path_str(&path), "--T", "1"], vec!["analyze", "--model", path_str(&path)]] {
        let r = qstab(&args);
        assert_eq!(r.code, 1, "{}", args[0]);
        assert!(r.stderr.contains("64"), "{}", r.stderr);
    }
}

#[test]
fn malformed_models_are_rejected_with_reasons() {
    let dir = TempDir::new().unwrap();
    let target = json!({"kind": "pure_state", "payload": [[1.0, 0.0], [0.0, 0.0]]});
    let negative = qubit_model(zero2(), json!([{"matrix": sigma_plus(), "rate": -1.0}]), None, target.clone());
    let r = qstab(&["analyze", "--model", path_str(&write_json(&dir, "n.json", &negative))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("negative rate"), "{}", r.stderr);

    let mut unknown = qubit_model(zero2(), json!([]), None, target.clone());
    unknown["bogus"] = json!(1);
    let r = qstab(&["analyze", "--model", path_str(&write_json(&dir, "u.json", &unknown))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("unknown field") && r.stderr.contains("line"), "{}", r.stderr);

    let nonherm = qubit_model(sigma_plus(), json!([]), None, target);
    let r = qstab(&["analyze", "--model", path_str(&write_json(&dir, "h.json", &nonherm))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("H not Hermitian"), "{}", r.stderr);

    let r = qstab(&["analyze", "--model", path_str(&dir.path().join("missing.json"))]);
    assert_eq!(r.code, 1);
}

#[test]
fn target_file_overrides_model_target() {
    let dir = TempDir::new().unwrap();
    let model = closed_loop(&dir, "example1");
    let other = write_json(&dir, "t.json", &json!({"kind": "pure_state", "payload": [[0.0, 0.0], [1.0, 0.0]]}));
    let (ra, rb) = (dir.path().join("a.json"), dir.path().join("b.json"));
    let a = qstab(&["analyze", "--model", path_str(&model), "--out-report", path_str(&ra)]);
    let b = qstab(&["analyze", "--model", path_str(&model), "--target", path_str(&other), "--out-report", path_str(&rb)]);
    assert_eq!(a.code, 0);
    assert_eq!(b.code, 3, "|1⟩ decays under σ₊");
    assert_ne!(read_report(&ra).input_digest, read_report(&rb).input_digest);
}

#[test]
fn reports_are_deterministic_and_round_trip() {
    let dir = TempDir::new().unwrap();
    for (cmd, name) in [("analyze", "example3_no_control"), ("synthesize", "example3"), ("simulate", "example2")] {
        let (a, b) = (dir.path().join("a.json"), dir.path().join("b.json"));
        let model = fixture(name);
        for p in [&a, &b] {
            let mut args = vec![cmd, "--model", path_str(&model), "--out-report", path_str(p)];
            if cmd == "simulate" {
                args.extend(["--T", "5", "--ensemble", "3"]);
            }
            qstab(&args);
        }
        let (ta, tb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
        assert_eq!(ta, tb, "{cmd} report differs between runs");
        let rep = read_report(&a);
        assert_eq!(rep.tool, "qstab");
        assert_eq!(rep.tool_version, env!("CARGO_PKG_VERSION"));
        assert_eq!(rep.input_digest.len(), 64);
        assert_eq!(rep.to_json().unwrap().into_bytes(), ta);
    }
}

fn bits(m: &nalgebra::DMatrix<num_complex::Complex64>) -> Vec<(u64, u64)> {
    m.iter().map(|z| (z.re.to_bits(), z.im.to_bits())).collect()
}

#[test]
fn fixtures_round_trip_bit_exactly() {
    for name in FIXTURES {
        let text = std::fs::read_to_string(fixture(name)).unwrap();
        let a = parse_model_str(&text).unwrap();
        let emitted = emit_model(&a);
        let b = parse_model_str(&emitted).unwrap();
        assert_eq!(bits(&a.hamiltonian), bits(&b.hamiltonian), "{name}");
        assert_eq!(a.noise.len(), b.noise.len());
        for (x, y) in a.noise.iter().zip(&b.noise) {
            assert_eq!(bits(&x.op), bits(&y.op));
            assert_eq!(x.rate.to_bits(), y.rate.to_bits());
        }
        assert_eq!(a.measurement.as_ref().map(bits), b.measurement.as_ref().map(bits));
        assert_eq!(a.options, b.options);
        let frames = |t: &TargetSpec| bits(&t.decomposition().frame());
        assert_eq!(frames(&a.target), frames(&b.target), "{name}");
        assert_eq!(emit_model(&b), emitted, "{name}");
    }
}

#[test]
fn demos_run_and_unknown_names_fail() {
    for name in ["example1", "example2", "example3", "example4"] {
        let r = qstab(&["demo", name]);
        assert_eq!(r.code, 0, "{name}: {}", r.stdout);
        assert!(r.stdout.contains("result: PASS"));
        assert!(r.stdout.contains("published:"));
    }
    let r = qstab(&["demo", "example3"]);
    assert!(r.stdout.contains("both the measurement and the Hamiltonian compensation can be implemented locally"));
    let r = qstab(&["demo", "example4"]);
    assert!(r.stdout.contains("(|01> + |10>)/sqrt(2)"));
    let r = qstab(&["demo", "example5"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("unknown demo"));
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(qstab(&[]).code, 1);
    assert_eq!(qstab(&["analyze"]).code, 1);
    assert_eq!(qstab(&["frobnicate"]).code, 1);
    assert_eq!(qstab(&["--help"]).code, 0);
    assert_eq!(qstab(&["--version"]).code, 0);
}

#[test]
fn feedback_synthesis_rejects_extra_noise() {
    let dir = TempDir::new().unwrap();
    let target = json!({"kind": "pure_state", "payload": [[1.0, 0.0], [0.0, 0.0]]});
    let model = qubit_model(zero2(), json!([{"matrix": sigma_plus(), "rate": 1.0}]), Some(sigma_plus()), target);
    let r = qstab(&["synthesize", "--model", path_str(&write_json(&dir, "m.json", &model))]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("no additional noise"));
}

#[test]
fn open_loop_synthesis_repairs_uncontrolled_bell_target() {
    let dir = TempDir::new().unwrap();
    let closed = dir.path().join("c.json");
    let report = dir.path().join("r.json");
    let r = qstab(&[
        "synthesize",
        "--model",
        path_str(&fixture("example3_no_control")),
        "--out-model",
        path_str(&closed),
        "--out-report",
        path_str(&report),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    let rep = read_report(&report);
    assert!(rep.iterations.unwrap() >= 1);
    assert!(rep.operators.feedback.is_none());
    assert_eq!(qstab(&["analyze", "--model", path_str(&closed)]).code, 0);
}
