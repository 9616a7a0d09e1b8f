use std::path::Path;
use std::process::{Command, Output};

fn fourwire(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fourwire")).args(args).output().expect("running the binary")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_fixture(dir: &Path, name: &str) -> String {
    let path = dir.join(format!("{name}.json"));
    let o = fourwire(&["fixture", name, "--out", path.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    path.to_str().unwrap().to_string()
}

#[test]
fn lists_fixtures() {
    let o = fourwire(&["fixture"]);
    assert!(o.status.success());
    assert!(stdout(&o).lines().any(|l| l == "f1-opf"));
    assert!(!fourwire(&["fixture", "nope"]).status.success());
}

#[test]
fn validate_reports_rules() {
    let dir = tempfile::tempdir().unwrap();
    let f1 = write_fixture(dir.path(), "f1");
    let o = fourwire(&["validate", &f1]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "ok");

    let text = std::fs::read_to_string(&f1).unwrap().replace("\"linecode\": \"cable4\"", "\"linecode\": \"nope\"");
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, text).unwrap();
    let o = fourwire(&["validate", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("unknown-linecode"));
}

#[test]
fn power_flow_prints_solution() {
    let dir = tempfile::tempdir().unwrap();
    let f2 = write_fixture(dir.path(), "f2");
    let o = fourwire(&["pf", &f2, "--form", "acr", "--start", "load-aware"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "optimal");
    assert!(v["voltages"]["b3.n"].is_array() || v["voltages"]["b3.n"].is_object());
}

#[test]
fn opf_reads_options_and_reports_iteration_limit() {
    let dir = tempfile::tempdir().unwrap();
    let net = write_fixture(dir.path(), "f2-opf");
    let opts = dir.path().join("opts.toml");
    std::fs::write(&opts, "[solver]\nmax_iter = 2\n").unwrap();
    let o = fourwire(&["opf", &net, "--opts", opts.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["status"], "iteration-limit");

    std::fs::write(&opts, "[solver]\nmax_iterations = 2\n").unwrap();
    let o = fourwire(&["opf", &net, "--opts", opts.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("max_iterations"));
}

#[test]
fn reduce_and_dump() {
    let dir = tempfile::tempdir().unwrap();
    let f2 = write_fixture(dir.path(), "f2");
    let out = dir.path().join("kron.json");
    assert!(fourwire(&["reduce", &f2, "--mode", "kron", "--out", out.to_str().unwrap()]).status.success());
    let o = fourwire(&["validate", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stdout(&o));
    let o = fourwire(&["dump-model", out.to_str().unwrap(), "--form", "acr"]);
    assert!(o.status.success());
    assert!(!stdout(&o).is_empty());
    assert!(!fourwire(&["reduce", &f2, "--mode", "match"]).status.success());
}

#[test]
fn bench_writes_reports() {
    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("instances");
    std::fs::create_dir(&inst).unwrap();
    write_fixture(&inst, "f1-opf");
    let csv = dir.path().join("report.csv");
    let js = dir.path().join("report.json");
    let o = fourwire(&[
        "bench",
        "--instances",
        inst.to_str().unwrap(),
        "--forms",
        "ivr",
        "--out",
        csv.to_str().unwrap(),
        "--json",
        js.to_str().unwrap(),
        "--no-timing",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().count(), 4);
    assert!(text.lines().nth(1).unwrap().starts_with("f1-opf,fourwire,ivr,"));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&js).unwrap()).unwrap();
    assert_eq!(v["rows"].as_array().unwrap().len(), 3);
}
