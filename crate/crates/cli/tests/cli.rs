use std::process::Command;

use serde_json::Value;

fn run(args: &[&str]) -> (i32, Value, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_unifact")).args(args).output().expect("binary runs");
    let stdout = String::from_utf8_lossy(&out.stdout);
    let doc = serde_json::from_str(&stdout).unwrap_or(Value::Null);
    (out.status.code().unwrap_or(-1), doc, String::from_utf8_lossy(&out.stderr).into_owned())
}

#[test]
fn phi_example() {
    let (code, doc, _) = run(&["phi", "--n", "2", "--K", "3", "--point", "[-1,-4,0.2]"]);
    assert_eq!(code, 0);
    let phi = doc["phi"].as_array().unwrap();
    let got: Vec<(f64, f64)> = phi.iter().map(|p| (p[0].as_f64().unwrap(), p[1].as_f64().unwrap())).collect();
    assert!((got[0].0).abs() < 1e-12 && (got[0].1).abs() < 1e-12);
    assert!((got[1].0 - 5.0).abs() < 1e-12 && (got[1].1).abs() < 1e-12);
}

#[test]
fn report_header() {
    let (_, doc, _) = run(&["stratum", "--a", "[0,2,0]", "--K", "4"]);
    assert_eq!(doc["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(doc["command"], "stratum");
    assert_eq!(doc["config"]["K"], 4);
    assert!(doc["config"]["term_budget"].as_u64().is_some());
    assert_eq!(doc["stratum"], 2);
}

#[test]
fn verify_identity_with_no_factors() {
    let (code, doc, _) = run(&["verify", "--target", "[[1,0],[0,1]]", "--factors", "[]"]);
    assert_eq!(code, 0);
    assert_eq!(doc["matches"], true);
    assert_eq!(doc["K"], 0);
}

#[test]
fn determinant_two_is_a_domain_error() {
    let (code, doc, stderr) = run(&["factor-const", "--matrix", "[[2,0],[0,1]]"]);
    assert_eq!(code, 1);
    assert!(stderr.contains("determinant"));
    assert!(doc["error"]["message"].as_str().unwrap().contains("determinant"));
}

#[test]
fn factor_const_output_verifies() {
    let m = r#"{"n":3,"rows":[[2,1,0],[1,1,0],[[0,1],0,1]]}"#;
    let (code, doc, _) = run(&["factor-const", "--matrix", m]);
    assert_eq!(code, 0);
    assert_eq!(doc["verify"]["matches"], true);
    let factors = serde_json::to_string(&doc).unwrap();
    let (code, doc, _) = run(&["verify", "--target", m, "--factors", &factors]);
    assert_eq!(code, 0);
    assert_eq!(doc["matches"], true);
}

#[test]
fn factor_sl2_round_trip() {
    let one = r#"{"terms":[{"mono":[],"re":"1"}]}"#;
    let z = r#"{"terms":[{"mono":[{"var":"z","exp":1}],"re":"1"}]}"#;
    let zz1 = r#"{"terms":[{"mono":[{"var":"z","exp":2}],"re":"1"},{"mono":[],"re":"1"}]}"#;
    // [[1+z^2, z], [z, 1]]
    let m = format!(r#"{{"n":2,"rows":[[{zz1},{z}],[{z},{one}]]}}"#);
    let (code, doc, _) = run(&["factor-sl2", "--matrix", &m]);
    assert_eq!(code, 0, "{doc}");
    assert_eq!(doc["verify"]["matches"], true);
    let factors = serde_json::to_string(&doc).unwrap();
    let (code, doc, _) = run(&["verify", "--target", &m, "--factors", &factors]);
    assert_eq!(code, 0);
    assert_eq!(doc["matches"], true);
}

#[test]
fn preimage_reaches_target() {
    let (code, doc, _) = run(&["preimage", "--b", r#"[{"re":0,"im":1},[2,0],-1]"#]);
    assert_eq!(code, 0);
    assert_eq!(doc["K"], 3);
    assert!(doc["residual"].as_f64().unwrap() < 1e-12);
    assert_eq!(doc["orientation"], "inverse");
}

#[test]
fn zero_target_is_a_domain_error() {
    let (code, _, _) = run(&["preimage", "--b", "[0,0,0]"]);
    assert_eq!(code, 1);
}

#[test]
fn schema_and_io_errors_exit_three() {
    assert_eq!(run(&["phi", "--n", "2", "--K", "3", "--point", "[[1,2,3]]"]).0, 3);
    assert_eq!(run(&["phi", "--n", "2", "--K", "3", "--point", "/nonexistent/point.json"]).0, 3);
    assert_eq!(run(&["phi", "--n", "2", "--K", "3", "--point", "[1]", "--bogus"]).0, 3);
    assert_eq!(run(&["verify", "--target", "[[1]]", "--factors", "[]", "--tol=-1"]).0, 3);
}

#[test]
fn inputs_from_files() {
    let dir = std::env::temp_dir().join(format!("unifact-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("path.json");
    std::fs::write(&path, r#"[{"t":0,"b":[1,0,1]},{"t":0.5,"b":[0.5,0.5,1]},{"t":1,"b":[0,1,1]}]"#).unwrap();
    let out = dir.join("report.json");
    let (code, _, _) = run(&["track", "--n", "3", "--path", path.to_str().unwrap(), "--output", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let records = doc["records"].as_array().unwrap();
    assert_eq!(records.len(), 3);
    assert!(records.iter().all(|r| r["residual"].as_f64().unwrap() < 1e-8));
    assert_eq!(records[0]["Z"]["factors"].as_array().unwrap().len(), 3);
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn seeded_commands_are_deterministic() {
    let args = ["singular-check", "--n", "3", "--K", "4", "--samples", "4", "--seed", "11"];
    let (c1, d1, _) = run(&args);
    let (_, d2, _) = run(&args);
    assert_eq!(c1, 0);
    assert_eq!(d1["reports"], d2["reports"]);
    assert_eq!(d1["disagreements"], 0);
}

#[test]
fn spray_flow_conserves_residual() {
    let p = r#"{"terms":[{"mono":[{"var":"x","exp":1},{"var":"y","exp":1}],"re":"1"},{"mono":[{"var":"x","exp":1}],"re":"2"}]}"#;
    let start = r#"[{"var":"x","re":0.5},{"var":"y","re":-1},{"var":"z","re":2}]"#;
    let (code, doc, _) = run(&["spray-flow", "--p", p, "--i", "x", "--j", "z", "--start", start, "--t", "0.3,-0.2"]);
    assert_eq!(code, 0, "{doc}");
    assert!(doc["residual_drift"].as_f64().unwrap() < 1e-12);
}
