use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn spofe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spofe"))
        .args(args)
        .env_remove("SPOFE_THREADS")
        .output()
        .unwrap()
}

fn demo() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/demo.csv")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn expand_writes_named_terms() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("in.csv");
    let output = dir.path().join("out.csv");
    fs::write(&input, "a,b\n1,2\n3,5\n4,4\n").unwrap();
    let out = spofe(&["expand", "--input", s(&input), "--output", s(&output)]);
    assert!(out.status.success());
    let text = fs::read_to_string(&output).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "1,a,b,a^2,b^2,a*b");
    assert_eq!(lines.count(), 3);

    let out = spofe(&["expand", "--input", s(&input), "--output", s(&output), "--raw"]);
    assert!(out.status.success());
    let text = fs::read_to_string(&output).unwrap();
    assert_eq!(text.lines().nth(1).unwrap(), "1,1,2,1,4,2");
}

#[test]
fn missing_input_is_a_usage_error() {
    let out = spofe(&["expand", "--input", "/no/such/file.csv", "--output", "/tmp/x.csv"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/no/such/file.csv"));
}

#[test]
fn malformed_input_reports_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.csv");
    fs::write(&input, "a,b\n1,2\n3,oops\n").unwrap();
    let out = spofe(&["run", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("row 2"), "{err}");
}

#[test]
fn numerical_failures_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("flat.csv");
    fs::write(&input, "a,b\n1,1\n1,1\n1,1\n").unwrap();
    let out = spofe(&["run", "--input", s(&input)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("standardize"));
}

#[test]
fn fixed_run_selects_ten_and_dumps_side_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let dumps = dir.path().join("dumps");
    let out = spofe(&[
        "run", "--input", s(&demo()), "--selection", "fixed:10", "--num-components", "12",
        "--output", s(&report), "--dump-dir", s(&dumps),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["selection"]["selected"].as_array().unwrap().len(), 10);
    assert_eq!(v["schema_version"], 1);
    assert!(v.get("timings").is_none());
    for f in ["psi.csv", "signals.csv", "lambdas.csv", "stats.csv"] {
        assert!(dumps.join(f).exists(), "{f}");
    }
    let psi = fs::read_to_string(dumps.join("psi.csv")).unwrap();
    assert_eq!(psi.lines().next().unwrap().split(',').count(), 21);
    assert_eq!(psi.lines().count(), 201);
}

#[test]
fn config_file_and_flags_combine() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("spofe.toml");
    fs::write(&cfg, "kernel = \"cosine\"\nnum_components = 5\nselection = \"bh:0.3\"\n").unwrap();
    let out = spofe(&["run", "--input", s(&demo()), "--config", s(&cfg), "--selection", "fixed:3"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["config"]["kernel"], "cosine");
    assert_eq!(v["config"]["selection"], "fixed:3");
    assert_eq!(v["kpca"]["m_requested"], 5);

    fs::write(&cfg, "kernel = \"linear\"\n").unwrap();
    let out = spofe(&["run", "--input", s(&demo()), "--config", s(&cfg)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn timings_are_opt_in() {
    let out = spofe(&["run", "--input", s(&demo()), "--num-components", "4", "--timings"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["timings"].as_array().unwrap().len() >= 5);
}

#[test]
fn invalid_thread_count_is_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_spofe"))
        .args(["run", "--input", s(&demo())])
        .env("SPOFE_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_and_dump_signals() {
    let out = spofe(&["simulate-fdr", "--n", "200", "--p", "4", "--k", "5", "--repeats", "3", "--seed", "1"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["repeats"].as_array().unwrap().len(), 3);
    assert!(v["mean_fdp"].as_f64().unwrap() <= 1.0);

    let dir = tempfile::tempdir().unwrap();
    let out = spofe(&["dump-signals", "--input", s(&demo()), "--num-components", "3", "--output", s(dir.path())]);
    assert!(out.status.success());
    let sig = fs::read_to_string(dir.path().join("signals.csv")).unwrap();
    assert_eq!(sig.lines().next().unwrap(), "z1,z2,z3");
    assert_eq!(fs::read_to_string(dir.path().join("lambdas.csv")).unwrap().lines().count(), 4);
}
