use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use geodex::report::{run_diagnostics, RunConfig};
use serde_json::Value;

fn geodex(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_geodex"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

fn synth_circle(dir: &Path) {
    let out = geodex(&["synth", "--kind", "plane-circle", "--n", "360", "--dim", "8", "--out", "syn"], dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn stat(report: &Value, test: &str, name: &str) -> f64 {
    report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["test"] == test)
        .unwrap_or_else(|| panic!("no {test} report"))["statistics"][name]
        .as_f64()
        .unwrap()
}

#[test]
fn circle_report_bundle() {
    let dir = tempfile::tempdir().unwrap();
    synth_circle(dir.path());
    let out = geodex(&["report", "--manifest", "syn/manifest.json", "--out", "bundle"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let bundle = dir.path().join("bundle");
    let report = read_json(&bundle.join("report.json"));
    assert_eq!(report["schema"], "geodex-report/1");
    assert_eq!(report["version"], geodex::VERSION);
    assert_eq!(report["config"]["diagnostics"]["seed"], 0);
    assert!(stat(&report, "geodesic_isometry", "pearson") >= 0.999);
    assert_eq!(report["skipped"][0]["test"], "homeomorphism");
    for f in ["direct_cossim_vs_d2.svg", "geodesic_vs_metric.svg", "inputs.lock"] {
        assert!(bundle.join(f).exists(), "missing {f}");
    }
    let lock = fs::read_to_string(bundle.join("inputs.lock")).unwrap();
    assert_eq!(lock.lines().count(), 2);
    assert!(lock.lines().all(|l| l.split_whitespace().next().unwrap().len() == 64));
}

#[test]
fn identical_runs_give_identical_bundles() {
    let dir = tempfile::tempdir().unwrap();
    synth_circle(dir.path());
    for out in ["a", "b"] {
        let o = geodex(&["report", "--manifest", "syn/manifest.json", "--seed", "4", "--out", out], dir.path());
        assert!(o.status.success());
    }
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 4);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        assert!(a == b, "{name:?} differs");
    }
}

#[test]
fn echoed_config_reproduces_the_statistics() {
    let dir = tempfile::tempdir().unwrap();
    synth_circle(dir.path());
    let o = geodex(&["report", "--manifest", "syn/manifest.json", "--k", "3", "--out", "bundle"], dir.path());
    assert!(o.status.success());
    let report = read_json(&dir.path().join("bundle/report.json"));
    let mut config: RunConfig = serde_json::from_value(report["config"].clone()).unwrap();
    config.data = dir.path().join(&config.data);
    config.manifest = dir.path().join(&config.manifest);
    // both sides go through the same text round trip, so equality here is
    // equality of the written decimal representations
    let text = serde_json::to_string_pretty(&run_diagnostics(&config).unwrap()).unwrap();
    let again: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(again["reports"], report["reports"]);
}

#[test]
fn zero_row_names_the_stage_and_row() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("data.csv"),
        "label,value,x0,x1\na,0.1,1,0\nb,0.5,0,0\nc,0.9,0,1\nd,0.3,1,1\n",
    )
    .unwrap();
    fs::write(dir.path().join("m.json"), r#"{"type":"interval","lo":0,"hi":1}"#).unwrap();
    let o = geodex(&["report", "--data", "data.csv", "--manifest", "m.json", "--out", "r"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("embeddings.normalize_rows") && err.contains("row 1"), "{err}");
    assert!(!dir.path().join("r").exists());
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = geodex(&["report", "--data", "x.csv", "--manifest", "nope.json"], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(geodex(&["frobnicate"], dir.path()).status.code(), Some(1));
    assert_eq!(geodex(&["report", "--k", "three", "--manifest", "m"], dir.path()).status.code(), Some(1));
    assert_eq!(geodex(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn existing_output_directory_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    synth_circle(dir.path());
    fs::create_dir(dir.path().join("taken")).unwrap();
    let o = geodex(&["report", "--manifest", "syn/manifest.json", "--out", "taken"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(fs::read_dir(dir.path().join("taken")).unwrap().count(), 0);
}

#[test]
fn fetch_without_token_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "red\ngreen\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geodex"))
        .args(["fetch", "p.txt", "--out", "e.csv", "--endpoint", "http://127.0.0.1:9", "--token-env", "GEODEX_NO_SUCH_VAR"])
        .env_remove("GEODEX_NO_SUCH_VAR")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(!dir.path().join("e.csv").exists());
}

#[test]
fn unreachable_endpoint_is_a_network_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("p.txt"), "red\n").unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_geodex"))
        .args([
            "fetch", "p.txt", "--out", "e.csv", "--endpoint", "http://127.0.0.1:9", "--token-env", "GEODEX_T",
            "--max-retries", "1", "--backoff-ms", "1",
        ])
        .env("GEODEX_T", "secret-value")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(!String::from_utf8_lossy(&o.stderr).contains("secret-value"));
}

#[test]
fn subcommands_produce_their_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = geodex(&["synth", "--kind", "arc", "--alpha", "2", "--n", "120", "--dim", "16", "--out", "arc"], d);
    assert!(o.status.success());

    let o = geodex(&["pca", "--manifest", "arc/manifest.json", "--components", "3", "--out", "pca.csv"], d);
    assert!(o.status.success());
    let header = fs::read_to_string(d.join("pca.csv")).unwrap();
    assert!(header.starts_with("label,value,x0,x1,x2\n"));

    let o = geodex(&["graph", "--manifest", "arc/manifest.json", "--out", "g.json"], d);
    assert!(o.status.success());
    let g = read_json(&d.join("g.json"));
    assert_eq!(g["connected"], true);
    assert_eq!(g["n"], 120);

    for cmd in ["test-homeo", "test-direct", "test-geodesic"] {
        let o = geodex(&[cmd, "--manifest", "arc/manifest.json", "--components", "0"], d);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let r: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(r["reports"].as_array().unwrap().len(), 1);
    }
    let r: Value = serde_json::from_slice(
        &geodex(&["test-geodesic", "--manifest", "arc/manifest.json", "--components", "0"], d).stdout,
    )
    .unwrap();
    assert!((stat(&r, "geodesic_isometry", "slope") - 2.0).abs() < 0.04);

    let o = geodex(&["validate-theorem", "--kind", "arc", "--alpha", "4"], d);
    let t: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(t["relative_error"].as_f64().unwrap() <= 1e-4);

    let o = geodex(
        &["synth", "--kind", "superposition", "--n", "400", "--dim", "64", "--features", "100", "--sparsity", "3", "--out", "sup"],
        d,
    );
    assert!(o.status.success());
    let s: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(s["max_reconstruction_residual"].as_f64().unwrap() < 1e-9);
}

#[test]
fn labelled_space_skips_the_rank_test() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let mut csv = String::from("label,value,x0,x1,x2\n");
    let names = ["a", "b", "c"];
    for i in 0..30 {
        let t = i as f64 * 0.2;
        csv.push_str(&format!("r{i},{},{},{},{}\n", names[i % 3], t.cos(), t.sin(), 0.1 * (i % 3) as f64));
    }
    fs::write(d.join("data.csv"), csv).unwrap();
    fs::write(
        d.join("m.json"),
        r#"{"data":"data.csv","space":{"type":"discrete_matrix","labels":["a","b","c"],"matrix":[[0,1,2],[1,0,1],[2,1,0]]}}"#,
    )
    .unwrap();
    let o = geodex(&["report", "--manifest", "m.json", "--components", "0", "--eps-pct", "50", "--out", "r"], d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&d.join("r/report.json"));
    assert_eq!(r["skipped"][0]["test"], "homeomorphism");
    assert_eq!(r["reports"].as_array().unwrap().len(), 2);
}
