use std::io::Write;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::NamedTempFile;

const WORKED: &str = "\
(const a Array) (const b Array)
(const i Index) (const j Index) (const k Index)
(const d Elem)
(A (= a (wr b i d)))
(B (distinct (rd a j) (rd b j)))
(B (distinct (rd a k) (rd b k)))
(B (distinct j k))
";

fn file(text: &str) -> NamedTempFile {
    let mut f = NamedTempFile::new().unwrap();
    f.write_all(text.as_bytes()).unwrap();
    f
}

fn axdiff(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_axdiff")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn check_unsat() {
    let f = file("(const e Elem)\n(assert (distinct e e))\n");
    let o = axdiff(&["check", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(20));
    assert_eq!(stdout(&o), "unsat\n");
}

#[test]
fn check_sat_with_model() {
    let f = file("(const a Array)(const i Index)(const e Elem)\n(assert (= (rd a i) e))\n");
    let o = axdiff(&["check", "--model", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(10));
    let out = stdout(&o);
    assert!(out.starts_with("sat\n(model\n"), "{out}");
    assert!(out.contains("a = ["), "{out}");
}

#[test]
fn parse_error_exit_code() {
    let f = file("(const a Array)\n(const i Index)\n(assert (= (rd a) i))\n");
    let o = axdiff(&["check", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains(":3:12:"), "{err}");
}

#[test]
fn usage_errors() {
    assert_eq!(axdiff(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(axdiff(&["check", "/nonexistent/problem"]).status.code(), Some(1));
    let f = file("(const e Elem)\n(assert (distinct e e))\n");
    assert_eq!(axdiff(&["interp", f.path().to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn interp_worked_example_with_trace() {
    let f = file(WORKED);
    let trace = NamedTempFile::new().unwrap();
    let o = axdiff(&[
        "interp",
        "--validate",
        "--trace",
        trace.path().to_str().unwrap(),
        f.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(20), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("unsat"));
    let itp = lines.next().unwrap();
    assert!(!itp.contains("_k"), "{itp}");

    let json: Value = serde_json::from_str(&std::fs::read_to_string(trace.path()).unwrap()).unwrap();
    let nodes = json.as_array().unwrap();
    assert!(!nodes.is_empty());
    let rules = [
        "Close1",
        "Close2",
        "Propagate1",
        "Propagate2",
        "Define0",
        "Define1",
        "Define2",
        "Disjunction1",
        "Disjunction2",
        "Redplus1",
        "Redplus2",
        "Redminus1",
        "Redminus2",
        "ConstElim0",
        "ConstElim1",
        "ConstElim2",
    ];
    for (n, node) in nodes.iter().enumerate() {
        let o = node.as_object().unwrap();
        assert_eq!(o["id"].as_u64(), Some(n as u64));
        match &o["parent"] {
            Value::Null => assert_eq!(n, 0),
            p => assert!(p.as_u64().unwrap() < n as u64),
        }
        assert!(rules.contains(&o["rule"].as_str().unwrap()));
        assert!(["A", "B", "AB"].contains(&o["component"].as_str().unwrap()));
        assert!(o.contains_key("payload"));
        assert!(o["added"].as_array().unwrap().iter().all(Value::is_string));
        assert!(o["removed"].as_array().unwrap().iter().all(Value::is_string));
        assert!(o["interpolant"].is_string());
    }
}

#[test]
fn interp_sat_with_model() {
    let f = file("(const a Array)(const i Index)(const e Elem)(const d Elem)\n(A (= (rd a i) e))\n(B (= (rd a i) d))\n");
    let o = axdiff(&["interp", "--model", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(10));
    assert!(stdout(&o).starts_with("sat\n(model\n"));
}

#[test]
fn no_simplify_still_validates() {
    let f = file(WORKED);
    let o = axdiff(&["interp", "--no-simplify", "--validate", "--seed", "7", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(20), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn branch_budget_is_reported() {
    let f = file(WORKED);
    let o = axdiff(&["interp", "--max-branches", "0", f.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("branches"));
}
