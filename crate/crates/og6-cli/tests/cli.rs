use std::path::PathBuf;
use std::process::{Command, Output};

use jsonschema::JSONSchema;
use serde_json::Value;

fn og6(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_og6")).args(args).env_remove("OG6_JOBS").output().expect("run og6")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn schema(name: &str) -> JSONSchema {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    JSONSchema::compile(&v).expect("schema compiles")
}

/// Runs with `--format json`, checks the exit code and validates against the named schema.
fn json_of(args: &[&str], schema_name: &str, code: i32) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = og6(&all);
    assert_eq!(o.status.code(), Some(code), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let s = schema(schema_name);
    if let Err(errs) = s.validate(&v) {
        let msgs: Vec<String> = errs.map(|e| format!("{} at {}", e, e.instance_path)).collect();
        panic!("{args:?} does not match {schema_name}: {msgs:?}");
    }
    v
}

#[test]
fn info_of_the_host() {
    let v = json_of(&["info", "3U+2[-2]"], "info", 0);
    assert_eq!(v["det"], -4);
    assert_eq!(v["signature"], serde_json::json!([3, 5]));
    assert_eq!(v["disc_orders"], serde_json::json!([2, 2]));
    let d4 = json_of(&["info", "D4"], "info", 0);
    assert_eq!(d4["disc_orders"], serde_json::json!([2, 2]));
    assert_eq!(d4["name"], "D4");
}

#[test]
fn parse_errors_are_usage_errors_with_position() {
    let o = og6(&["info", "A0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position 0"));
    let o = og6(&["info", "U+D3"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("position 2"));
}

#[test]
fn gram_files_in_both_formats() {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    let plain = dir.join("a2.txt");
    let js = dir.join("a2.json");
    std::fs::write(&plain, "-2 1\n1 -2\n").unwrap();
    std::fs::write(&js, r#"{"gram": [[-2, 1], [1, -2]]}"#).unwrap();
    let a = json_of(&["info", &format!("@{}", plain.display())], "info", 0);
    let b = json_of(&["info", &format!("@{}", js.display())], "info", 0);
    assert_eq!(a, b);
    assert_eq!(a["name"], "A2");
}

#[test]
fn no_fixed_point_free_order_eight_isometry_of_d4() {
    let o = og6(&["isometries", "D4", "--order", "8", "--fixed-rank", "0", "--disc", "trivial"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), "none");
    let v = json_of(&["isometries", "A2", "--order", "3", "--fixed-rank", "0"], "isometries", 0);
    assert_eq!(v["isometries"].as_array().unwrap().len(), 2);
}

#[test]
fn enumerate_and_budget() {
    let v = json_of(&["enumerate", "-m", "2", "--rank", "5"], "enumerate", 0);
    assert!(v.as_array().unwrap().iter().all(|l| l["disc_orders"].as_array().unwrap().iter().all(|d| d == 2)));
    let o = og6(&["enumerate", "-m", "2", "--det-bound", "100000"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn embeddings_abstract_and_explicit() {
    let v = json_of(&["embed", "A2", "bL"], "embed", 0);
    assert_eq!(v["kind"], "classes");
    assert!(!v["classes"].as_array().unwrap().is_empty());
    let v = json_of(&["embed", "A2", "D4", "--full-gluing"], "embed", 0);
    assert_eq!(v["kind"], "explicit");
    // No room in a definite host of smaller rank.
    let o = og6(&["embed", "A4", "A2"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(stdout(&o).trim(), "none");
}

#[test]
fn classify_order_two_is_deterministic_across_jobs() {
    let v = json_of(&["classify", "--order", "2"], "classify", 0);
    assert_eq!(v["rows"].as_array().unwrap().len(), 4);
    let a = og6(&["classify", "--order", "2", "--jobs", "1"]);
    let b = Command::new(env!("CARGO_BIN_EXE_og6"))
        .args(["classify", "--order", "2"])
        .env("OG6_JOBS", "4")
        .output()
        .unwrap();
    assert_eq!(a.stdout, b.stdout);
    let table = stdout(&a);
    for n in ["[-2]", "2[-2]", "3[-2]", "D4"] {
        assert!(table.lines().any(|l| l.split_whitespace().nth(1) == Some(n)), "{n} missing:\n{table}");
    }
}

#[test]
fn excluded_order_prints_a_certificate() {
    let v = json_of(&["classify", "--order", "7"], "classify", 1);
    assert_eq!(v["certificate"]["failing_stage"], "elementary");
    let o = og6(&["classify"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn full_run_verify_and_report() {
    let v = json_of(&["verify", "--theorem", "3"], "verify", 0);
    assert_eq!(v["pass"], true);
    assert_eq!(v["details"]["realized_orders"], serde_json::json!([1, 2, 3, 4, 5, 6, 8, 10, 12]));
    let rows = json_of(&["report"], "report", 0);
    let orders: std::collections::BTreeSet<i64> =
        rows.as_array().unwrap().iter().map(|r| r["order"].as_i64().unwrap()).collect();
    assert_eq!(orders.into_iter().collect::<Vec<_>>(), vec![1, 2, 3, 4, 5, 6, 8, 10, 12]);
}
