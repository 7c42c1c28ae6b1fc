use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn golden(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn run(config: Option<&str>, args: &[&str]) -> Output {
    run_env(config, args, &[])
}

fn run_env(config: Option<&str>, args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_lyapbound"));
    cmd.env_remove("LYAPBOUND_THREADS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    if config.is_some() {
        cmd.args(["--config", "-"]);
    }
    cmd.args(args).stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::piped());
    let mut child = cmd.spawn().expect("binary runs");
    {
        let mut stdin = child.stdin.take().unwrap();
        stdin.write_all(config.unwrap_or("").as_bytes()).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    serde_json::from_str(&stdout(o)).unwrap_or_else(|e| panic!("{e}: {}", stdout(o)))
}

fn without_wall_time(mut v: Value) -> Value {
    v["wall_time_s"] = Value::from(0);
    v
}

#[test]
fn bounds_matches_golden_report() {
    let out = Command::new(env!("CARGO_BIN_EXE_lyapbound"))
        .env_remove("LYAPBOUND_THREADS")
        .arg("--config")
        .arg(golden("constant.json"))
        .arg("bounds")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let expected: Value =
        serde_json::from_str(&std::fs::read_to_string(golden("constant_bounds.json")).unwrap()).unwrap();
    assert_eq!(without_wall_time(json(&out)), expected);
}

#[test]
fn bounds_schema_is_stable() {
    let out = run(
        Some(r#"{"model": {"family": "constant-poisson", "c": 3}, "orbit": {"M": 2}, "refine": {"n_iteration": 5}}"#),
        &["bounds"],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    let mut keys: Vec<_> = v.as_object().unwrap().keys().cloned().collect();
    keys.sort();
    assert_eq!(
        keys,
        ["K", "K_certified", "M", "holder", "lambda_F", "lambda_u", "n_iteration", "ratio", "status", "wall_time_s"]
    );
    for key in ["lambda_F", "lambda_u", "ratio"] {
        let pair = v[key].as_array().unwrap();
        assert_eq!(pair.len(), 2);
        assert!(pair[0].as_f64().unwrap() <= pair[1].as_f64().unwrap());
    }
    assert!(v["holder"]["k"].is_u64());
    assert!(v["holder"]["alpha"].as_f64().unwrap() > 0.0);
    // Certified endpoints carry 17 significant digits.
    let text = stdout(&out);
    let start = text.find("\"lambda_u\":[").unwrap() + "\"lambda_u\":[".len();
    let first = text[start..].split([',', ']']).next().unwrap();
    assert_eq!(first.split('e').next().unwrap().replace(['.', '-'], "").len(), 17, "{first}");
}

#[test]
fn subcritical_model_exits_with_k_failure() {
    let out = run(Some(r#"{"model": {"lambda": -2}, "orbit": {"M": 3}, "refine": {"n_iteration": 5}}"#), &["bounds"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert!(v["lambda_F"].is_null() && v["ratio"].is_null() && v["holder"].is_null());
    assert_eq!(v["K_certified"], Value::Bool(false));
    let lu = v["lambda_u"].as_array().unwrap();
    assert!((lu[0].as_f64().unwrap() - std::f64::consts::LN_2).abs() < 1e-9);
}

#[test]
fn default_example_is_certified() {
    let out = run(None, &["bounds"]);
    assert_eq!(out.status.code(), Some(0), "{}", stdout(&out));
    let v = json(&out);
    assert!(v["K"].as_f64().unwrap() <= 0.945);
    assert!(v["lambda_F"][1].as_f64().unwrap() < 0.0);
}

#[test]
fn fibre_exponent_not_negative_exits_3() {
    // Too little refinement to certify the sign of the fibre exponent.
    let out = run(Some(r#"{"orbit": {"M": 2}, "refine": {"n_iteration": 0}}"#), &["bounds"]);
    assert_eq!(out.status.code(), Some(3), "{}", stdout(&out));
    assert_eq!(json(&out)["status"], Value::from("not_certified_negative"));
}

#[test]
fn sweep_rows_increase_with_lambda() {
    let out = run(Some(r#"{"model": {"omega": 0}}"#), &["sweep", "--param", "lambda", "--from", "0.6", "--to", "1.0", "--steps", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(!text.contains('\r'));
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,lF_lo,lF_hi,lu_lo,lu_hi,ratio_lo,ratio_hi"));
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|f| f.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    for w in rows.windows(2) {
        assert!(w[0][0] < w[1][0]);
        assert!(w[0][5] < w[1][5] && w[0][6] < w[1][6]);
    }
}

#[test]
fn verify_k_reports_certificate() {
    let out = run(None, &["verify-k", "--c", "0.94", "--nmax", "10"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["certified"], Value::Bool(true));
    assert!(v["cells_checked"].as_u64().unwrap() >= 1);

    let out = run(Some(r#"{"model": {"family": "constant-poisson", "c": 2}}"#), &["verify-k", "--c", "0.1", "--nmax", "6"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["certified"], Value::Bool(false));
}

#[test]
fn qbounds_csv() {
    let out = run(Some(r#"{"model": {"lambda": 2, "omega": 0}}"#), &["qbounds", "--grid", "8", "--n", "30"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("x_lo,x_hi,q_lower,q_upper"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|f| f.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0][0], 0.0);
    assert_eq!(rows[7][1], 1.0);
    for r in &rows {
        assert!(0.0 <= r[2] && r[2] <= r[3] && r[3] < 1.0, "{r:?}");
    }
}

#[test]
fn orbits_lines() {
    let out = run(Some(r#"{"orbit": {"M": 4}}"#), &["orbits"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines.len(), 1 + 1 + 2 + 3);
    for l in lines {
        let fields: Vec<_> = l.split(' ').collect();
        let k: usize = fields[0].parse().unwrap();
        assert_eq!(fields.len(), 2 + 2 * k);
    }
}

#[test]
fn simulate_json() {
    let args = ["simulate", "--x0", "0.25", "--gens", "20", "--trials", "500", "--seed", "9"];
    let a = run(None, &args);
    assert_eq!(a.status.code(), Some(0));
    let v = json(&a);
    let freq = v["freq"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&freq));
    assert!(v["stderr"].is_f64() && v["capped_trials"].is_u64());
    let b = run_env(None, &args, &[("LYAPBOUND_THREADS", "2")]);
    assert_eq!(stdout(&a), stdout(&b));

    let z = json(&run(None, &["simulate", "--x0", "0.25", "--gens", "0", "--trials", "10", "--seed", "1"]));
    assert_eq!(z["freq"].as_f64(), Some(0.0));
}

#[test]
fn config_errors_exit_1_with_location() {
    let out = run(Some("{\n  \"model\": {\"lamda\": 1.0}\n}"), &["bounds"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line 2") && err.contains("lamda"), "{err}");

    let out = run(Some(r#"{"map": {"eps": 0.3}}"#), &["orbits"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn thread_override_is_validated() {
    let out = run_env(None, &["orbits"], &[("LYAPBOUND_THREADS", "zero")]);
    assert_eq!(out.status.code(), Some(1));
}
