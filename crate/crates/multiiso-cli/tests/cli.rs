use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_multiiso"));
    c.env_remove("MULTIISO_TOL");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &str) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input.as_bytes()).unwrap();
    child.wait_with_output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&o.stdout))
    })
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("multiiso-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn save(dir: &Path, name: &str, o: &Output) -> PathBuf {
    assert_eq!(code(o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let p = dir.join(name);
    std::fs::write(&p, &o.stdout).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn canonical2(dir: &Path, name: &str, c: &str, theta: &str) -> PathBuf {
    save(dir, name, &run(&["canonical", "--c", c, "--theta", theta]))
}

fn canonical3(dir: &Path) -> PathBuf {
    let o = run(&["canonical", "--alpha", "0.3,0.1", "--alpha1", "-0.2,0.4", "--theta", "0,1", "--theta1", "1"]);
    save(dir, "c3.json", &o)
}

fn residuals(v: &Value) -> Vec<(String, f64)> {
    v["residuals"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(k, x)| (k.clone(), x.as_f64().unwrap()))
        .collect()
}

#[test]
fn validate_canonical_pair_passes() {
    let dir = scratch("validate");
    let a = canonical2(&dir, "a.json", "0.5", "1");
    let o = run(&["validate", s(&a)]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["pass"], true);
    assert_eq!(v["command"], "validate");
    for (k, x) in residuals(&v) {
        assert!(x < 1e-10, "{k} = {x}");
    }
}

#[test]
fn equiv_separates_determinants() {
    let dir = scratch("equiv");
    let a = canonical2(&dir, "a.json", "0.5", "1");
    let b = canonical2(&dir, "b.json", "0.5", "0,1");
    let o = run(&["equiv", s(&a), s(&b)]);
    assert_eq!(code(&o), 1);
    assert_eq!(json(&o)["pass"], false);
    let same = run(&["equiv", s(&a), s(&a)]);
    assert_eq!(code(&same), 0);
    assert!(json(&same)["artifacts"]["W"].is_array());
}

#[test]
fn input_errors_exit_two() {
    let empty = run_stdin(&["validate"], r#"{"dim": 1, "n": 0, "tuple": []}"#);
    assert_eq!(code(&empty), 2);
    let unknown = run_stdin(
        &["validate"],
        r#"{"dim": 1, "n": 1, "tuple": [{"U": [[[1, 0]]], "P": [[[0, 0]]], "Q": 1}]}"#,
    );
    assert_eq!(code(&unknown), 2);
    let err = String::from_utf8_lossy(&unknown.stderr);
    assert!(err.contains("tuple[0]") && err.contains("line 1"), "{err}");
    let ragged = run_stdin(&["validate"], r#"{"dim": 2, "n": 1, "tuple": [{"U": [[[1, 0]]], "P": [[[0, 0]]]}]}"#);
    assert_eq!(code(&ragged), 2);
    let malformed = run_stdin(&["validate"], "{\"dim\": 1,\n \"n\": }");
    assert_eq!(code(&malformed), 2);
    assert!(String::from_utf8_lossy(&malformed.stderr).contains("line 2"));
    assert_eq!(code(&run(&["canonical", "--c", "1.5", "--theta", "1"])), 2);
}

#[test]
fn non_unitary_entry_fails_validation() {
    let o = run_stdin(&["validate"], r#"{"dim": 1, "n": 1, "tuple": [{"U": [[[2, 0]]], "P": [[[0, 0]]]}]}"#);
    assert_eq!(code(&o), 1);
    assert!(json(&o)["residuals"]["U1_unitarity"].as_f64().unwrap() > 1.0);
}

#[test]
fn tolerance_sources_are_ordered() {
    let dir = scratch("tol");
    let a = canonical2(&dir, "a.json", "0.5", "1");
    let strict = bin().env("MULTIISO_TOL", "1e-30").args(["validate", s(&a)]).output().unwrap();
    assert_eq!(code(&strict), 1);
    let flag = bin()
        .env("MULTIISO_TOL", "1e-30")
        .args(["validate", s(&a), "--tol-eq", "1e-9"])
        .output()
        .unwrap();
    assert_eq!(code(&flag), 0);
    let text = std::fs::read_to_string(&a).unwrap();
    let with_file_tol = text.replacen("{", r#"{"tolerances": {"eq": 1e-30},"#, 1);
    assert_eq!(code(&run_stdin(&["validate"], &with_file_tol)), 1);
    assert_eq!(code(&run_stdin(&["validate", "--tol-eq", "1e-9"], &with_file_tol)), 0);
}

#[test]
fn outputs_are_normalized_and_reproducible() {
    let dir = scratch("normal");
    let a = canonical2(&dir, "a.json", "0.5", "0.6,0.8");
    let text = std::fs::read_to_string(&a).unwrap();
    // Completing the first pair reproduces the file byte for byte.
    let v: Value = serde_json::from_str(&text).unwrap();
    let mut prefix = v.clone();
    prefix["tuple"].as_array_mut().unwrap().truncate(1);
    let out = dir.join("full.json");
    let o = run_stdin(&["complete", "--out", s(&out)], &prefix.to_string());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let full = std::fs::read_to_string(&out).unwrap();
    assert_eq!(full, text);
    let eq = run(&["equiv", s(&a), s(&out)]);
    assert_eq!(code(&eq), 0);
    let again = run_stdin(&["complete", "--out", s(&out)], &prefix.to_string());
    assert_eq!(again.stdout, o.stdout);
    assert_eq!(std::fs::read_to_string(&out).unwrap(), full);
    for args in [&["classify", s(&a)][..], &["equiv", s(&a), s(&out), "--seed", "7"][..]] {
        assert_eq!(run(args).stdout, run(args).stdout);
    }
    assert!(text.contains("5.0000000000000000e-1"));
    let pretty = run(&["canonical", "--c", "0.5", "--theta", "0.6,0.8", "--pretty"]);
    let reparsed: Value = serde_json::from_slice(&pretty.stdout).unwrap();
    assert_eq!(reparsed, v);
}

#[test]
fn compose_and_complete_three_factors() {
    let dir = scratch("compose");
    let c3 = canonical3(&dir);
    let reduced = dir.join("reduced.json");
    let o = run(&["compose", s(&c3), "--factors", "1,3", "--out", s(&reduced)]);
    assert_eq!(code(&o), 0);
    assert!(json(&o)["residuals"]["product_symbol"].as_f64().unwrap() < 1e-12);
    assert_eq!(code(&run(&["validate", s(&reduced)])), 0);
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&reduced).unwrap()).unwrap();
    assert_eq!(r["n"], 2);
    assert_eq!(code(&run(&["compose", s(&c3), "--factors", "2,2"])), 2);
}

#[test]
fn pivotal_and_build3_on_a_three_tuple() {
    let dir = scratch("pivotal");
    let c3 = canonical3(&dir);
    let o = run(&["pivotal", s(&c3)]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    for k in ["T1", "q_min", "q_max", "W"] {
        assert!(v["artifacts"][k].is_array(), "{k}");
    }
    for q in ["min", "max"] {
        let text = std::fs::read_to_string(&c3).unwrap();
        let with_q = text.replacen("{", &format!(r#"{{"params": {{"q1": "{q}"}},"#), 1);
        let built = run_stdin(&["build3"], &with_q);
        let path = save(&dir, &format!("built_{q}.json"), &built);
        assert_eq!(code(&run(&["validate", s(&path)])), 0);
    }
}

#[test]
fn structure_report_on_a_pair() {
    let dir = scratch("structure");
    let a = canonical2(&dir, "a.json", "0.5", "1");
    let o = run(&["structure", s(&a), "--trunc", "6"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stdout));
    let v = json(&o);
    for k in ["T", "Z", "T_u", "T_cnu"] {
        assert!(v["artifacts"][k].is_array(), "{k}");
    }
    for (k, x) in residuals(&v) {
        assert!(x < 1e-9, "{k} = {x}");
    }
}

#[test]
fn blaschke_models_have_the_expected_size() {
    let o = run(&["blaschke", "--factor", "0", "--factor", "0;0.5,0"]);
    assert_eq!(code(&o), 0);
    let v = json(&o);
    assert_eq!(v["dim"], 4);
    assert_eq!(v["n"], 3);
    assert_eq!(code(&run_stdin(&["validate"], &String::from_utf8_lossy(&o.stdout))), 0);
    assert_eq!(code(&run(&["blaschke", "--factor", "1.5"])), 2);
}

#[test]
fn several_files_are_processed_side_by_side() {
    let dir = scratch("batch");
    let a = canonical2(&dir, "a.json", "0.5", "1");
    let c3 = canonical3(&dir);
    let bad = dir.join("bad.json");
    std::fs::write(&bad, r#"{"dim": 1, "n": 1, "tuple": [{"U": [[[2, 0]]], "P": [[[0, 0]]]}]}"#).unwrap();
    let o = run(&["validate", s(&a), s(&c3)]);
    assert_eq!(code(&o), 0);
    for p in [&a, &c3] {
        let report = std::fs::read_to_string(format!("{}.validate.json", p.display())).unwrap();
        assert!(report.contains("\"pass\":true"));
    }
    assert_eq!(code(&run(&["validate", s(&a), s(&bad)])), 1);
    let missing = dir.join("missing.json");
    assert_eq!(code(&run(&["validate", s(&a), s(&missing)])), 2);
}
