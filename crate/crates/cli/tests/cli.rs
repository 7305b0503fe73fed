use std::process::{Command, Output};

fn rrg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rrg")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

#[test]
fn adk_methods_agree() {
    let out = rrg(&["adk", "--d", "2", "--k", "4"]);
    assert!(out.status.success());
    assert_eq!(stdout(&out), "84\n");
    let closed = stdout(&rrg(&["adk", "--d", "3", "--k", "6", "--table"]));
    let listed = stdout(&rrg(&["adk", "--d", "3", "--k", "6", "--table", "--method", "enum"]));
    let ie = stdout(&rrg(&["adk", "--d", "3", "--k", "6", "--table", "--method", "ie"]));
    assert_eq!(closed, listed);
    assert_eq!(closed, ie);
    assert!(closed.starts_with("d,k,a\n1,1,2\n"));
}

#[test]
fn saved_graph_gives_same_counts() {
    let dir = tempfile::tempdir().unwrap();
    let graph = dir.path().join("g.json");
    let out = rrg(&["sample", "--n", "300", "--d", "2", "--seed", "9", "--out", graph.to_str().unwrap()]);
    assert!(out.status.success());
    let from_file = rrg(&["cycles", "--graph", graph.to_str().unwrap(), "--r", "5"]);
    let sampled = rrg(&["cycles", "--n", "300", "--d", "2", "--r", "5", "--seed", "9"]);
    assert_eq!(stdout(&from_file), stdout(&sampled));
    assert!(stdout(&sampled).starts_with("k,value\n1,"));
    for method in ["words", "transfer", "spectral"] {
        let cnbw = rrg(&["cnbw", "--graph", graph.to_str().unwrap(), "--r", "6", "--method", method]);
        assert_eq!(stdout(&cnbw), stdout(&rrg(&["cnbw", "--graph", graph.to_str().unwrap(), "--r", "6"])));
    }
}

#[test]
fn experiment_output_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str, threads: &str, format: &str| {
        let path = dir.path().join(name);
        let out = rrg(&[
            "experiment", "--stat", "cycles", "--n", "200", "--d", "2", "--r", "3", "--trials", "50", "--seed", "7",
            "--threads", threads, "--format", format, "--out", path.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        path
    };
    let a = run("a.csv", "1", "csv");
    let b = run("b.csv", "3", "csv");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let trials = |p: &std::path::Path| std::fs::read(p.with_file_name(format!("{}.trials.csv", p.file_stem().unwrap().to_str().unwrap()))).unwrap();
    assert_eq!(trials(&a), trials(&b));
    let first = std::fs::read(run("r.json", "2", "json")).unwrap();
    let second = std::fs::read(run("r.json", "2", "json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn config_errors_exit_with_2() {
    let bad = [
        vec!["experiment", "--stat", "cycles", "--n", "100", "--d", "2", "--beta", "0.6"],
        vec!["experiment", "--stat", "cycles", "--n", "100", "--d", "2", "--r", "2", "--beta", "0.3"],
        vec!["experiment", "--stat", "cycles", "--n", "100", "--d", "2"],
        vec!["cycles", "--n", "10", "--r", "2", "--bogus"],
        vec!["linstat", "--n", "50", "--mode", "growing"],
    ];
    for args in bad {
        assert_eq!(rrg(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn checks_pass_with_exit_0() {
    let exact = rrg(&["coupling-check", "--exact", "--n", "4"]);
    assert!(exact.status.success());
    assert!(stdout(&exact).contains("uniform true"));
    assert!(rrg(&["coupling-check", "--trials", "20"]).status.success());
    assert!(rrg(&["discrepancy", "--n", "200", "--d", "3", "--pairs", "50"]).status.success());
}

#[test]
fn linstat_emits_json() {
    let out = rrg(&["linstat", "--n", "120", "--d", "2", "--seed", "3", "--f", "square"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    let raw = v["raw"].as_f64().unwrap();
    let centered = v["centered"].as_f64().unwrap();
    assert!((raw - centered - 120.0 * 4.0 / 3.0).abs() < 1e-8);
    assert_eq!(v["per_k_contributions"].as_array().unwrap().len(), 3);
}

#[test]
fn spectrum_emits_eigenvalues() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eig.csv");
    let out = rrg(&["spectrum", "--n", "40", "--d", "2", "--emit", path.to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(&path).unwrap();
    assert_eq!(csv.lines().count(), 41);
    let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first[0], "1");
    assert!((first[1].parse::<f64>().unwrap() - 4.0).abs() < 1e-9);
}
