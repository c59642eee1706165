use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn w2sg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_w2sg")).args(args).output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn radius_case_one() {
    let out = w2sg(&["radius", "--mu0", "0.5", "--m1", "1.0", "--m2", "0.1", "--m3", "0.02", "--lambda", "0.05"]);
    let v = json(&out);
    assert!((v["zeta"].as_f64().unwrap() - 0.106).abs() < 0.001);
    assert!((v["angle_deg"].as_f64().unwrap() - 6.1).abs() < 0.05);
}

#[test]
fn radius_from_activation() {
    let out = w2sg(&["radius", "--activation", "mollified_relu", "--rho", "1", "--lambda", "0.05"]);
    let v = json(&out);
    assert!(v["zeta"].as_f64().unwrap() > 0.0);
    assert_eq!(v["lambda"].as_f64().unwrap(), 0.05);
}

#[test]
fn overlap_prediction() {
    let v = json(&w2sg(&["overlap", "--alpha", "50", "--lambda", "15"]));
    assert!((v["predicted"].as_f64().unwrap() - 0.999911).abs() < 1e-6);
}

#[test]
fn bound_at_zero_steps() {
    let out = w2sg(&[
        "bound", "--tau", "0.5", "--mu", "0.25", "--phi", "0", "--delta", "0.001", "--G", "5", "--d", "200",
        "--T-list", "0,2000",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# d0=1"));
    assert_eq!(lines[1], "T,bound");
    assert_eq!(lines[2], "0,1");
    let v: f64 = lines[3].split(',').nth(1).unwrap().parse().unwrap();
    assert!(v < 1.0);
}

#[test]
fn check_reports_infinite_rho_min_as_null() {
    let v = json(&w2sg(&[
        "check", "--alpha", "1", "--lambda", "0.5", "--tau", "0.5", "--eps0", "0.01", "--mu", "0.25", "--phi",
        "0.01", "--delta", "0.001", "--G", "5", "--eps-d", "0.01", "--rho", "0.9",
    ]));
    assert!(v["rho_min"].is_null());
    assert_eq!(v["aligned"], false);
    assert_eq!(v["detectable"], false);
}

#[test]
fn stats_on_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("t.csv");
    fs::write(&f, "# comment\na,b\n1,2\n2,4\n3,6\n4,8\n5,10\n").unwrap();
    let x = format!("{}:a", f.display());
    let y = format!("{}:b", f.display());
    let v = json(&w2sg(&["stats", "--x", &x, "--y", &y]));
    assert_eq!(v["spearman_rho"].as_f64().unwrap(), 1.0);
    assert!((v["r_squared"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    let bad = format!("{}:nope", f.display());
    assert_eq!(w2sg(&["stats", "--x", &x, "--y", &bad]).status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(w2sg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(w2sg(&["radius", "--mu0", "oops"]).status.code(), Some(1));
    assert_eq!(w2sg(&["--help"]).status.code(), Some(0));
    // both Hessian constants vanish
    let out = w2sg(&["radius", "--mu0", "0.5", "--m1", "1", "--m2", "0", "--m3", "0", "--lambda", "0.05"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(w2sg(&["run", "/nonexistent.toml"]).status.code(), Some(1));
}

fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("tiny.toml");
    fs::write(
        &path,
        r#"kind = "exp1"
d = 20
lambda = 15.0
rho = [0.0, 1.0]
gamma = 0.5
eta = 4e-5
T = 5
n_pre = 400
seeds = [1, 2]
activation = "hermite3"
"#,
    )
    .unwrap();
    path
}

#[test]
fn run_writes_manifest_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let cfg = cfg.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let r = w2sg(&["run", cfg, "--out", out.to_str().unwrap(), "--jobs", "1"]);
        assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    }
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["kind"], "exp1");
    for name in ["exp1.csv", "exp1_aggregate.csv", "manifest.json"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
    let csv = fs::read_to_string(a.join("exp1.csv")).unwrap();
    assert!(csv.starts_with("sweep_param,sweep_value,seed,final_distance"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
}

#[test]
fn run_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    let out = dir.path().join("o");
    let r = w2sg(&[
        "run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "7", "--set", "T=2",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let csv = fs::read_to_string(out.join("exp1.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("7")));
    let bad = w2sg(&["run", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--set", "nope=1"]);
    assert_eq!(bad.status.code(), Some(1));
}
