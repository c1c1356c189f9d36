use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn gapflag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gapflag")).args(args).env_remove("GAPFLAG_SEED").output().expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
}

fn zeros(n: usize) -> Value {
    json!(vec![vec![[0.0, 0.0]; n]; n])
}

fn write_json(path: &Path, v: &Value) {
    fs::write(path, serde_json::to_string(v).unwrap()).unwrap();
}

fn pauli() -> Vec<Value> {
    vec![
        json!([[[0.0, 0.0], [1.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]),
        json!([[[0.0, 0.0], [0.0, -1.0]], [[0.0, 1.0], [0.0, 0.0]]]),
        json!([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [-1.0, 0.0]]]),
    ]
}

/// Bloch vector (0.3, 0.2, 0.5) as a density matrix.
fn qubit_state() -> Value {
    json!({"n": 2, "rho": [[[0.75, 0.0], [0.15, -0.1]], [[0.15, 0.1], [0.25, 0.0]]]})
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
        .collect()
}

#[test]
fn convert_eigenvalues_to_gaps() {
    let out = gapflag(&["convert", "--n", "3", "--p", "0.6,0.3,0.1"]);
    assert!(out.status.success());
    let v = stdout_json(&out);
    assert!(close(&floats(&v["r"]), &[0.3, 0.2], 1e-12));
    assert_eq!(v["in_polytope"], json!(true));
    assert_eq!(v["provenance"]["version"], json!(env!("CARGO_PKG_VERSION")));
}

#[test]
fn convert_rejects_gaps_outside_simplex() {
    let out = gapflag(&["convert", "--n", "3", "--r", "0.5,0.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn convert_boundary_gaps() {
    let out = gapflag(&["convert", "--n", "4", "--r", "0,0.5,0"]);
    assert!(out.status.success());
    assert!(close(&floats(&stdout_json(&out)["p"]), &[0.5, 0.5, 0.0, 0.0], 1e-12));
}

#[test]
fn convert_unsorted_needs_sort_flag() {
    assert_eq!(gapflag(&["convert", "--n", "3", "--p", "0.1,0.6,0.3"]).status.code(), Some(2));
    let out = gapflag(&["convert", "--n", "3", "--p", "0.1,0.6,0.3", "--sort"]);
    assert!(out.status.success());
    assert!(close(&floats(&stdout_json(&out)["p"]), &[0.6, 0.3, 0.1], 1e-15));
}

#[test]
fn geometry_examples() {
    let v = stdout_json(&gapflag(&["geometry", "--n", "3", "--r", "0,0", "--fisher"]));
    let g: Vec<Vec<f64>> = v["fisher"].as_array().unwrap().iter().map(floats).collect();
    assert!(close(&g[0], &[2.0, 1.0], 1e-12) && close(&g[1], &[1.0, 2.0], 1e-12));

    let v = stdout_json(&gapflag(&["geometry", "--n", "3", "--r", "0.3,0.2", "--purity"]));
    assert!((v["purity"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    let v = stdout_json(&gapflag(&["geometry", "--n", "2", "--r", "1", "--purity"]));
    assert!((v["purity"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn geometry_kl_on_pure_state_is_numerical_error() {
    assert_eq!(gapflag(&["geometry", "--n", "2", "--r", "1", "--kl"]).status.code(), Some(3));
    let v = stdout_json(&gapflag(&["geometry", "--n", "2", "--r", "0.5", "--kl"]));
    let want = 0.75 * 1.5f64.ln() + 0.25 * 0.5f64.ln();
    assert!((v["kl"]["exact"].as_f64().unwrap() - want).abs() < 1e-14);
}

#[test]
fn geometry_csv_has_provenance_header() {
    let out = gapflag(&["--seed", "9", "geometry", "--n", "3", "--r", "0.1,0.1", "--entropy", "--format", "csv"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().any(|l| l == "# seed: 9"), "{text}");
    assert!(text.lines().any(|l| l.starts_with("# program: gapflag")));
}

#[test]
fn verify_checks_pass() {
    for check in ["volumes", "unitarity", "qutrit-matrix", "measure"] {
        let out = gapflag(&["verify", check, "--n", "4", "--N", "20000", "--trials", "200"]);
        assert!(out.status.success(), "{check}: {}", String::from_utf8_lossy(&out.stdout));
        assert_eq!(stdout_json(&out)["status"], json!("PASS"));
    }
    let v = stdout_json(&gapflag(&["verify", "volumes", "--n", "4", "--N", "1000"]));
    assert_eq!(v["report"]["weighted_simplex"], json!("1/36"));
}

#[test]
fn verify_identity_and_forced_failure() {
    let out = gapflag(&["verify", "identity", "--n", "3", "--N", "100000"]);
    assert!(out.status.success());
    let out = gapflag(&["verify", "identity", "--n", "3", "--N", "1000", "--tol", "1e-9"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["status"], json!("FAIL"));
}

#[test]
fn sample_is_reproducible_and_seed_flag_beats_env() {
    let a = gapflag(&["sample", "--n", "3", "--N", "500", "--seed", "7"]);
    let b = gapflag(&["sample", "--n", "3", "--N", "500", "--seed", "7"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let env = Command::new(env!("CARGO_BIN_EXE_gapflag")).args(["sample", "--n", "3", "--N", "500"]).env("GAPFLAG_SEED", "7").output().unwrap();
    assert_eq!(a.stdout, env.stdout);
    let over = Command::new(env!("CARGO_BIN_EXE_gapflag")).args(["--seed", "8", "sample", "--n", "3", "--N", "500"]).env("GAPFLAG_SEED", "7").output().unwrap();
    assert_ne!(a.stdout, over.stdout);
    assert_eq!(stdout_json(&over)["provenance"]["seed"], json!(8));
}

#[test]
fn sample_diagnostics_and_empty_run() {
    let v = stdout_json(&gapflag(&["sample", "--n", "4", "--N", "4000", "--seed", "1"]));
    assert_eq!(v["frames"].as_array().unwrap().len(), 4000);
    let d = &v["diagnostics"];
    assert!(d["ks"].as_f64().unwrap() < d["critical_1pct"].as_f64().unwrap());
    assert!(d["max_unitarity_error"].as_f64().unwrap() < 1e-12);

    let out = gapflag(&["sample", "--n", "3", "--N", "0"]);
    assert!(out.status.success());
    assert!(stdout_json(&out)["frames"].as_array().unwrap().is_empty());
}

#[test]
fn evolve_depolarizing_both_methods_agree() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let rho0 = dir.path().join("rho0.json");
    let out = dir.path().join("out");
    write_json(&model, &json!({"n": 2, "H": zeros(2), "jumps": pauli(), "rates": [1.0, 1.0, 1.0]}));
    write_json(&rho0, &qubit_state());
    let res = gapflag(&[
        "evolve", "--model", model.to_str().unwrap(), "--rho0", rho0.to_str().unwrap(), "--method", "both",
        "--dt", "1e-3", "--t-end", "1", "--record-every", "10", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(s["max_divergence"].as_f64().unwrap() < 1e-6);
    for m in ["direct", "split"] {
        let k = s[m]["log_slopes"][0].as_f64().unwrap();
        assert!((k + 4.0).abs() < 1e-3, "{m}: {k}");
    }
    let rows = csv_rows(&out.join("split.csv"));
    assert_eq!(rows.len(), 101);
    // r(t) = |b| e^{-4t}
    let b0 = (0.3f64 * 0.3 + 0.2 * 0.2 + 0.5 * 0.5).sqrt();
    let last = rows.last().unwrap();
    assert!((last[1] - b0 * (-4.0 * last[0]).exp()).abs() < 1e-9);
    assert!(fs::read_to_string(out.join("direct.csv")).unwrap().starts_with("# program: gapflag"));
}

#[test]
fn evolve_unitary_keeps_gaps() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let rho0 = dir.path().join("rho0.json");
    let h = json!([[[1.0, 0.0], [0.4, 0.3]], [[0.4, -0.3], [-0.5, 0.0]]]);
    write_json(&model, &json!({"n": 2, "H": h}));
    write_json(&rho0, &qubit_state());
    let out = dir.path().join("out");
    let res = gapflag(&[
        "evolve", "--model", model.to_str().unwrap(), "--rho0", rho0.to_str().unwrap(), "--method", "split",
        "--dt", "1e-2", "--t-end", "2", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let rows = csv_rows(&out.join("split.csv"));
    let r0 = rows[0][1];
    assert!(rows.iter().all(|row| (row[1] - r0).abs() < 1e-12));
    assert!(!out.join("direct.csv").exists());
}

#[test]
fn evolve_crossing_breaks_split_but_not_direct() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let rho0 = dir.path().join("rho0.json");
    // pumps population out of the larger eigenvalue until the two cross
    let l = json!([[[0.0, 0.0], [0.0, 0.0]], [[1.0, 0.0], [0.0, 0.0]]]);
    write_json(&model, &json!({"n": 2, "H": zeros(2), "jumps": [l], "rates": [1.0]}));
    write_json(&rho0, &json!({"n": 2, "rho": [[[0.7, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.3, 0.0]]]}));
    let args = |out: &Path, extra: &[&'static str]| {
        let mut a = vec![
            "evolve".to_string(), "--model".into(), model.to_str().unwrap().into(), "--rho0".into(), rho0.to_str().unwrap().into(),
            "--dt".into(), "1e-3".into(), "--t-end".into(), "1".into(), "--out".into(), out.to_str().unwrap().into(),
        ];
        a.extend(extra.iter().map(|s| s.to_string()));
        a
    };
    let run = |a: Vec<String>| Command::new(env!("CARGO_BIN_EXE_gapflag")).args(a).output().unwrap();

    let out = dir.path().join("plain");
    let res = run(args(&out, &["--method", "both"]));
    assert_eq!(res.status.code(), Some(3));
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let tb = s["split"]["breakdown"].as_f64().unwrap();
    let tc = 1.4f64.ln();
    assert!(tb < tc && tb > tc - 0.01, "{tb}");
    assert_eq!(s["direct"]["t_final"].as_f64().unwrap(), 1.0);
    assert_eq!(csv_rows(&out.join("direct.csv")).len(), 1001);

    let out = dir.path().join("fallback");
    let res = run(args(&out, &["--method", "split", "--fallback"]));
    assert!(res.status.success());
    let s: Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(s["split"]["breakdown"].as_f64().unwrap(), tb);
    assert!(fs::read_to_string(out.join("split.csv")).unwrap().contains("# breakdown:"));
}

#[test]
fn evolve_missing_input_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let res = gapflag(&[
        "evolve", "--model", missing.to_str().unwrap(), "--rho0", missing.to_str().unwrap(), "--out", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(4));
}

#[test]
fn evolve_malformed_model_is_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    let rho0 = dir.path().join("rho0.json");
    write_json(&model, &json!({"n": 2, "H": [[[1.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]}));
    write_json(&rho0, &qubit_state());
    let res = gapflag(&[
        "evolve", "--model", model.to_str().unwrap(), "--rho0", rho0.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap(),
    ]);
    assert_eq!(res.status.code(), Some(2), "{}", String::from_utf8_lossy(&res.stderr));
}
