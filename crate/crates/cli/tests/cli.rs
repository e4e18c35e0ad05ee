use std::io::Write;
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn run(args: &[&str], stdin: &str) -> Output {
    let mut child = Command::new(env!("CARGO_BIN_EXE_exact-multinom"))
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(stdin.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn euclidean_distance_to_observed_reference_is_zero() {
    let req = r#"{"samples": [[10, 0]], "psi": "euclidean_ref",
                  "psi_params": {"theta0": [1, 0]}, "psi_limits": [0, 1.4142135623730951],
                  "maxit": 5, "chunksize": 20}"#;
    let v = json(&run(&["infer"], req));
    assert_eq!(v["estimate"], 0.0);
    let ci = v["conf_int"].as_array().unwrap();
    assert_eq!(ci[0], 0.0);
}

#[test]
fn field_omission_rules() {
    let base = r#""samples": [[7, 3]], "psi": "cell", "psi_limits": [0, 1], "maxit": 5, "chunksize": 20"#;

    let ci_only = json(&run(&["infer"], &format!("{{{base}}}")));
    assert!(ci_only.get("conf_int").is_some());
    assert!(ci_only.get("p_value").is_none() && ci_only.get("argmax_theta").is_none());
    assert_eq!(ci_only["trace"], Value::Array(vec![]));

    let p_only = json(&run(&["infer", "--trace"], &format!("{{{base}, \"psi0\": 0.5, \"conf_int\": false}}")));
    assert!(p_only.get("conf_int").is_none());
    assert!(p_only["p_value"].as_f64().unwrap() > 0.0);
    assert_eq!(p_only["trace"].as_array().unwrap().len(), 5);
    assert_eq!(p_only["iterations_used"], 100);
}

#[test]
fn exit_codes() {
    let missing_limits = run(&["infer"], r#"{"samples": [[7, 3]], "psi": "cell"}"#);
    assert_eq!(missing_limits.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing_limits.stderr).contains("psi_limits"));

    let malformed = run(&["infer"], r#"{"samples": [[7, "x"]]}"#);
    assert_eq!(malformed.status.code(), Some(2));

    let missing_file = run(&["infer", "--input", "/nonexistent/request.json"], "");
    assert_eq!(missing_file.status.code(), Some(2));

    let too_large = run(
        &["infer"],
        r#"{"samples": [[40, 40, 40, 40, 40], [40, 40, 40, 40, 40]], "psi": "bhattacharyya", "psi_limits": [0, 1]}"#,
    );
    assert_eq!(too_large.status.code(), Some(3), "{}", String::from_utf8_lossy(&too_large.stderr));
}

#[test]
fn cli_flags_override_the_request() {
    let req = r#"{"samples": [[7, 3]], "psi": "cell", "psi_limits": [0, 1], "psi0": 0.5, "conf_int": false}"#;
    let v = json(&run(&["infer", "--maxit", "4", "--chunksize", "10", "--seed", "3"], req));
    assert_eq!(v["iterations_used"], 40);
    let stopped = json(&run(&["infer", "--maxit", "4", "--chunksize", "10", "--threshold", "0.01"], req));
    assert_eq!(stopped["iterations_used"], 10);
}

#[test]
fn output_file() {
    let dir = std::env::temp_dir().join(format!("exact-multinom-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("result.json");
    let req = r#"{"samples": [[2, 3]], "psi": "cell", "psi_limits": [0, 1], "maxit": 3, "chunksize": 10}"#;
    let out = run(&["infer", "--output", path.to_str().unwrap()], req);
    assert!(out.status.success() && out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["estimate"], 0.4);
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn stability_csv_is_deterministic_and_nondecreasing() {
    let req = r#"{"samples": [[4, 3, 1], [1, 3, 4]], "psi": "bhattacharyya", "psi_limits": [0, 1],
                  "maxit": 10, "chunksize": 20, "seed": 5}"#;
    let args = ["stability", "--psi0", "0.6,0.8,0.95"];
    let a = run(&args, req);
    let b = run(&args, req);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("psi0,iteration,p_value"));
    let rows: Vec<(f64, usize, f64)> = lines
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(rows.len(), 30);
    for series in rows.chunks(10) {
        assert!(series.windows(2).all(|w| w[0].0 == w[1].0 && w[0].2 <= w[1].2));
        assert_eq!(series[9].1, 200);
    }
}

#[test]
fn simulate_small_scenario() {
    let scenario = r#"{
        "name": "point_mass", "psi": "cell", "psi_limits": [0, 1],
        "generator": {"type": "theta", "blocks": [[1.0, 0.0]]},
        "n": [6], "replicates": 5, "maxit": 5, "chunksize": 20,
        "coverage": {"exact": {"min": 1.0}, "bootstrap": {"min": 1.0}}
    }"#;
    let out = run(&["simulate"], scenario);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    for row in rows {
        assert!(row.contains(",5,1,"), "{row}");
        assert!(row.ends_with(",true"), "{row}");
    }
}

#[test]
fn simulate_rejects_inconsistent_causal_scenario() {
    let scenario = r#"{
        "name": "bad", "psi": "causal_lower", "psi_limits": [-1, 1],
        "generator": {"type": "theta", "blocks": [[0.5, 0.5], [0.5, 0.5]]},
        "n": [5, 5], "replicates": 2
    }"#;
    assert_eq!(run(&["simulate"], scenario).status.code(), Some(2));
}

#[test]
fn bench_small_shapes() {
    let out = run(
        &["bench", "--shape", "1,2,5", "--shape", "2,3,4", "--shape", "3,5,40", "--runs", "1", "--maxit", "2"],
        "",
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "k,d,n,cardinality,enumeration_s,p_value_s,status");
    assert!(lines[1].starts_with("1,2,5,6,") && lines[1].ends_with(",ok"));
    assert!(lines[2].starts_with("2,3,4,225,") && lines[2].ends_with(",ok"));
    assert!(lines[3].ends_with(",,,skipped"), "{}", lines[3]);
}
