use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ensemble-bounds"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn prefactor<'a>(v: &'a Value, q: &str) -> &'a Value {
    v["prefactors"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["quantity"] == q)
        .unwrap_or(&Value::Null)
}

#[test]
fn bounds_for_a_three_level_system() {
    let v = json(&["bounds", "--E", "-1,0,2", "--w", "0.5,0.3,0.2"]);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["seed"], 0);
    assert_eq!(v["g"], 0.2);
    assert_eq!(v["G"], 0.9);
    assert_eq!(prefactor(&v, "delta_rho_w")["lower"], 0.1);
    assert_eq!(prefactor(&v, "delta_rho_w")["upper"], 0.4);
    assert_eq!(prefactor(&v, "delta_E_1")["lower"], -5.0);
    assert_eq!(prefactor(&v, "delta_E_1")["upper"], 10.0);
}

#[test]
fn bounds_csv_uses_twelve_digits() {
    let out = run(&[
        "--format",
        "csv",
        "bounds",
        "--E",
        "-1,0,2",
        "--w",
        "0.5,0.3,0.2",
    ]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.starts_with("# schema_version=1 seed=0"));
    assert!(text.contains("sum_psi,2.22222222222,10,0.2,0.9"));
}

#[test]
fn named_optimal_weights_report_lowest_bound() {
    let v = json(&["bounds", "--w-optimal", "sumE_all", "--D", "4"]);
    assert_eq!(v["lowest_upper_bound"], 12.0);
    let v = json(&["bounds", "--w-optimal", "sumE_K", "--K", "2", "--D", "4"]);
    assert_eq!(v["lowest_upper_bound"], 4.0);
}

#[test]
fn degenerate_weights_are_refused_with_exit_code() {
    let out = run(&["bounds", "--E", "-1,0,2", "--w", "0.5,0.5,0"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("degenerate"), "{err}");
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for k in 0..2 {
        assert!(prefactor(&v, &format!("delta_psi_{k}")).is_null());
        assert!(prefactor(&v, &format!("delta_E_{k}")).is_null());
    }
}

#[test]
fn weights_examples() {
    let v = json(&["weights", "--target", "sumE_K", "--K", "2", "--D", "5"]);
    assert_eq!(v["weights"], serde_json::json!([0.75, 0.25, 0.0, 0.0, 0.0]));
    let v = json(&["weights", "--target", "E_k", "--k", "0", "--D", "3"]);
    assert_eq!(v["weights"], serde_json::json!([1.0, 0.0, 0.0]));
    let v = json(&[
        "weights",
        "--target",
        "sumPsi_all",
        "--E",
        "-1,0,2",
        "--verify",
    ]);
    assert_eq!(v["weights"], serde_json::json!([0.75, 0.25, 0.0]));
    assert_eq!(v["grid"]["agrees"], true);
}

#[test]
fn weights_out_of_range_is_validation_error() {
    let out = run(&["weights", "--target", "E_k", "--k", "5", "--D", "3"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["weights", "--target", "nonsense", "--D", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn polytope_slice_and_oracle() {
    let v = json(&[
        "polytope",
        "--w",
        "0.5,0.3,0.2",
        "--E",
        "-1,0,2",
        "--delta",
        "0.1",
        "--oracle",
    ]);
    let rho = &v["extrema"][0];
    assert_eq!(rho["quantity"], "delta_rho_w");
    assert_eq!(rho["min"], 0.01);
    assert_eq!(rho["max"], 0.04);
    assert!(v["extrema"]
        .as_array()
        .unwrap()
        .iter()
        .all(|r| r["agree"] == true));
    for s in v["slices"].as_array().unwrap() {
        assert!(!s["vertices"].as_array().unwrap().is_empty());
    }
}

#[test]
fn polytope_out_of_regime_exit_code() {
    let out = run(&[
        "polytope",
        "--w",
        "0.5,0.3,0.2",
        "--E",
        "-1,0,2",
        "--delta",
        "0.5",
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn polytope_cycle_check() {
    let v = json(&[
        "polytope",
        "--w",
        "0.5,0.3,0.2",
        "--E",
        "-1,0,2",
        "--delta",
        "0.1",
        "--permutation",
        "1,2,0",
    ]);
    assert_eq!(v["cycle"]["holds"], true);
    assert_eq!(v["cycle"]["length"], 3);
}

#[test]
fn vqe_spectrum_and_zero_iterations() {
    let v = json(&["vqe", "--reference-model", "--spectrum-only"]);
    let want = [-1.13483, -0.48575, 0.48575, 1.13483];
    for (x, y) in v["exact_spectrum"].as_array().unwrap().iter().zip(want) {
        assert!((x.as_f64().unwrap() - y).abs() < 1e-5);
    }
    let dir = tempfile::tempdir().unwrap();
    let v = json(&[
        "vqe",
        "--reference-model",
        "--weights-exp",
        "1",
        "--max-iter",
        "0",
        "--trace-dir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(v["runs"][0]["iterations"], 0);
    let trace = std::fs::read_to_string(dir.path().join("trace_w1.csv")).unwrap();
    assert_eq!(trace.lines().count(), 3);
}

#[test]
fn vqe_custom_model() {
    let v = json(&["vqe", "--a", "1", "--spectrum-only"]);
    assert_eq!(v["exact_spectrum"], serde_json::json!([-1.0, 1.0]));
    let out = run(&["vqe", "--a", "1,1", "--coupling", "1,0,0.5"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn sample_records_round_trip_through_check() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("r.csv");
    let rec_s = rec.to_str().unwrap();
    for mode in ["orthogonal", "unitary"] {
        let v = json(&[
            "--seed",
            "5",
            "sample",
            "--E",
            "-1,0,2",
            "--w",
            "0.5,0.3,0.2",
            "--n",
            "300",
            "--mode",
            mode,
            "--records",
            rec_s,
            "--check",
        ]);
        assert_eq!(v["seed"], 5);
        assert_eq!(v["runs"][0]["violations"], 0);
        let text = std::fs::read_to_string(&rec).unwrap();
        assert!(text.starts_with("# schema_version=1 seed=5"));
        let c = json(&[
            "check",
            "--E",
            "-1,0,2",
            "--w",
            "0.5,0.3,0.2",
            "--input",
            rec_s,
        ]);
        assert_eq!(c["violations"], serde_json::json!([]));
        assert!(c["records"].as_u64().unwrap() > 300);
    }
}

#[test]
fn sample_is_deterministic_per_seed() {
    let args = [
        "--seed",
        "3",
        "sample",
        "--E",
        "-1,0,2,5",
        "--w",
        "0.4,0.3,0.2,0.1",
        "--n",
        "100",
    ];
    assert_eq!(stdout(&run(&args)), stdout(&run(&args)));
}

#[test]
fn sample_without_random_draws() {
    let v = json(&["sample", "--E", "-1,0,2", "--w", "0.5,0.3,0.2", "--n", "0"]);
    let r = &v["runs"][0];
    assert_eq!(r["envelopes"]["random"]["records"], 0);
    assert!(r["records"].as_u64().unwrap() > 0);
}

#[test]
fn check_flags_violations() {
    let dir = tempfile::tempdir().unwrap();
    let rec = dir.path().join("bad.csv");
    std::fs::write(
        &rec,
        "# schema_version=1 seed=0\n\
         seed,sample_index,source,delta_E_w,delta_rho_w,delta_psi_0,delta_psi_1,delta_psi_2,delta_E_0,delta_E_1,delta_E_2,sum_psi,sum_abs_E\n\
         0,0,random,0.1,0.5,0,0,0,0,0,0,0,0\n",
    )
    .unwrap();
    let out = run(&[
        "check",
        "--E",
        "-1,0,2",
        "--w",
        "0.5,0.3,0.2",
        "--input",
        rec.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_input_file_is_io_error() {
    let out = run(&["bounds", "--E", "@/nonexistent/e.txt", "--w", "1,0,0"]);
    assert_eq!(out.status.code(), Some(4));
    let out = run(&[
        "check",
        "--E",
        "-1,0,2",
        "--w",
        "0.5,0.3,0.2",
        "--input",
        "/nonexistent.csv",
    ]);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn vectors_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let e = dir.path().join("e.txt");
    std::fs::write(&e, "-1\n0\n2\n").unwrap();
    let arg = format!("@{}", e.display());
    let v = json(&["bounds", "--E", &arg, "--w", "0.5,0.3,0.2"]);
    assert_eq!(v["g"], 0.2);
}
