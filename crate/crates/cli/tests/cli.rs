use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn osp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_osp")).args(args).output().expect("binary runs")
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json_out(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

const HALF: &str = r#""space":{"weights":[0.5,0.5]}"#;

#[test]
fn project_examples() {
    let dir = TempDir::new().unwrap();
    let bx = write(&dir, "box.json", &format!(r#"{{{HALF},"set":{{"type":"box","upper":[1,0.5]}},"g":[2,0.5]}}"#));
    let v = json_out(&osp(&["project", s(&bx), "--json"]));
    assert_eq!(floats(&v["projection"]), vec![1.0, 0.5]);
    assert_eq!(v["variational_check"]["passed"], Value::Bool(true));

    let e = write(&dir, "e.json", &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1}},"g":[1.5,1.5]}}"#));
    let v = json_out(&osp(&["project", s(&e), "--json"]));
    let f = floats(&v["projection"]);
    assert!((f[0] - 1.0).abs() < 1e-9 && (f[1] - 1.0).abs() < 1e-9);
}

#[test]
fn malformed_input_exits_2() {
    let dir = TempDir::new().unwrap();
    let bad = write(&dir, "bad.json", "{\"space\":");
    let out = osp(&["project", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("problem file"));
    let out = osp(&["project", s(&dir.path().join("missing.json"))]);
    assert_eq!(out.status.code(), Some(2));
    let unbounded = write(&dir, "u.json", &format!(r#"{{{HALF},"set":{{"type":"polytope","A":[[1,-1]],"b":[1]}},"g":[0,0]}}"#));
    assert_eq!(osp(&["project", s(&unbounded)]).status.code(), Some(2));
}

#[test]
fn bishop_phelps_examples() {
    let dir = TempDir::new().unwrap();
    let corner = write(
        &dir,
        "corner.json",
        &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1}},"g":[2,0],"options":{{"steps":5}}}}"#),
    );
    let csv = dir.path().join("trace.csv");
    let json = dir.path().join("trace.json");
    let out = osp(&["bishop-phelps", s(&corner), "--csv", s(&csv), "--json", s(&json)]);
    assert_eq!(out.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("final dist: 0"), "{stdout}");
    let text = fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("n,dist_n,l2err_n,value_n,gap_n"));
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|x| x.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 5);
    for r in &rows {
        assert_eq!(r[1], 0.0);
        assert!(r[4].abs() <= 1e-8);
        assert!((r[3] - 2.0 / r[0]).abs() < 1e-11);
    }
    let trace: Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(trace["steps"].as_array().unwrap().len(), 5);

    let inner = write(&dir, "inner.json", &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1}},"g":[1,0.5]}}"#));
    let out = osp(&["bishop-phelps", s(&inner)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not maximal"));
}

#[test]
fn box_trace_has_zero_distances() {
    let dir = TempDir::new().unwrap();
    let bx = write(&dir, "box.json", &format!(r#"{{{HALF},"set":{{"type":"box","upper":[1.5,0.25]}},"g":[1.5,0.25]}}"#));
    let csv = dir.path().join("box.csv");
    assert_eq!(osp(&["bishop-phelps", s(&bx), "--steps", "8", "--csv", s(&csv)]).status.code(), Some(0));
    let text = fs::read_to_string(&csv).unwrap();
    assert!(text.lines().skip(1).all(|l| l.split(',').nth(1) == Some("0")));
}

#[test]
fn maximality_lift_and_certificates() {
    let dir = TempDir::new().unwrap();
    let inner = write(
        &dir,
        "inner.json",
        &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1}},"g":[1,0.5],"mu":[1,1]}}"#),
    );
    let v = json_out(&osp(&["is-maximal", s(&inner), "--json"]));
    assert_eq!(v["is_maximal"], Value::Bool(false));
    let v = json_out(&osp(&["lift", s(&inner), "--json"]));
    let g = floats(&v["lifted"]);
    assert!(g[0] >= 1.0 && g[1] >= 0.5 && (0.5 * g[0] + 0.5 * g[1] - 1.0).abs() < 1e-9);
    let out = osp(&["certify-osp", s(&inner)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("not maximal"));

    let top = write(
        &dir,
        "top.json",
        &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1}},"g":[1,1],"mu":[1,1]}}"#),
    );
    let v = json_out(&osp(&["certify-osp", s(&top), "--json"]));
    assert_eq!(v["value"].as_f64(), Some(1.0));
    let v = json_out(&osp(&["numeraire", s(&top), "--json"]));
    assert_eq!(floats(&v["g"]), vec![1.0, 1.0]);
}

#[test]
fn utility_example() {
    let dir = TempDir::new().unwrap();
    let f = write(
        &dir,
        "u.json",
        &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1,"q":[0.25,0.75]}},"utility":{{"type":"log"}}}}"#),
    );
    let v = json_out(&osp(&["maximize-utility", s(&f), "--json"]));
    let g = floats(&v["g"]);
    assert!((g[0] - 2.0).abs() < 1e-8 && (g[1] - 2.0 / 3.0).abs() < 1e-8);
    assert!((v["certificate"]["value"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    let missing = write(&dir, "m.json", &format!(r#"{{{HALF},"set":{{"type":"box","upper":[1,1]}}}}"#));
    assert_eq!(osp(&["maximize-utility", s(&missing)]).status.code(), Some(2));
}

#[test]
fn curve_report() {
    let v = json_out(&osp(&["section24", "--gamma", "1", "--json"]));
    assert_eq!(v["report"]["c_gamma"].as_f64(), Some(0.75));
    assert!((v["report"]["k_argmax"]["alpha"].as_f64().unwrap() - 1.0).abs() < 1e-7);
    assert!((v["report"]["k_max"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let v = json_out(&osp(&["section24", "--gamma", "0.25", "--json"]));
    assert!((v["report"]["c_gamma"].as_f64().unwrap() - 8.0 / 9.0).abs() < 1e-11);
    assert!((v["report"]["k_argmax"]["beta"].as_f64().unwrap() - 0.5).abs() < 1e-7);
    assert!(v["report"]["certificate"].is_object());
    let v = json_out(&osp(&["section24", "--gamma", "0.0001", "--json"]));
    assert!(v["report"]["certificate"].is_object());
    assert_eq!(v["obstruction"]["holds"], Value::Bool(true));
    assert_eq!(osp(&["section24", "--gamma", "0"]).status.code(), Some(2));
    assert_eq!(osp(&["section24", "--gamma", "1.2"]).status.code(), Some(2));
}

#[test]
fn suite_subset_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a.json");
    let b = dir.path().join("b.json");
    for p in [&a, &b] {
        let out = osp(&["suite", "--fixtures", "section24", "--seed", "5", "--json", s(p)]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    }
    let (ja, jb) = (fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_eq!(ja, jb);
    let v: Value = serde_json::from_slice(&ja).unwrap();
    let ids: Vec<u64> = v["criteria"].as_array().unwrap().iter().map(|c| c["id"].as_u64().unwrap()).collect();
    assert_eq!(ids, vec![1, 10]);
    assert!(!dir.path().read_dir().unwrap().any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".tmp")));
}

#[test]
fn suite_fixture_file() {
    let dir = TempDir::new().unwrap();
    let corrupt = write(&dir, "c.json", "{\"space\":{\"weights\":[0.5,0.5]},\"set\":{\"type\":\"box\"");
    assert_eq!(osp(&["suite", "--fixtures", "6", "--file", s(&corrupt)]).status.code(), Some(2));
    let good = write(&dir, "g.json", &format!(r#"{{{HALF},"set":{{"type":"expectation","bound":1,"q":[0.3,0.9]}},"options":{{"steps":16}}}}"#));
    let out = osp(&["suite", "--fixtures", "6", "--file", s(&good), "--json"]);
    let v = json_out(&out);
    assert_eq!(v["criteria"].as_array().unwrap().len(), 2);
    assert_eq!(v["passed"], Value::Bool(true));
    assert_eq!(osp(&["suite", "--fixtures", "nonsense"]).status.code(), Some(2));
}
