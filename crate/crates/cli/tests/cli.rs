use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn abp(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_abp"))
        .args(args)
        .current_dir(dir)
        .env_remove("ABP_SEED")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}); stderr: {}", String::from_utf8_lossy(&o.stderr))
    })
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn generate_writes_mesh_and_reference() {
    let dir = tempfile::tempdir().unwrap();
    let o = abp(
        &["generate", "--geometry", "flat_disk", "--radius", "1", "--res", "16", "--ambient", "4", "-o", "disk.json"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let mesh = read_json(&dir.path().join("disk.json"));
    let v = mesh["vertices"].as_array().unwrap();
    assert_eq!(v[0].as_array().unwrap().len(), 4);
    let r = read_json(&dir.path().join("disk.reference.json"));
    assert_eq!(r["config"]["geometry"]["ambient"], 4);
    assert!((r["reference"]["exact_area"].as_f64().unwrap() - std::f64::consts::PI).abs() < 1e-12);

    let o = abp(&["generate", "--geometry", "holomorphic", "--k", "2", "--radius", "1", "--res", "32"], dir.path());
    assert_eq!(code(&o), 0);
    let mesh = read_json(&dir.path().join("holomorphic.json"));
    assert_eq!(mesh["vertices"][0].as_array().unwrap().len(), 4);
}

#[test]
fn bad_input_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let o = abp(&["generate", "--geometry", "torus"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown geometry"));
    let o = abp(&["verify", "--geometry", "flat_disk", "--level", "1", "--density", "0 − 1"], dir.path());
    assert_eq!(code(&o), 2);
    let o = abp(&["verify", "--geometry", "flat_disk", "--density", "1 +"], dir.path());
    assert_eq!(code(&o), 2);
    let o = abp(&["verify", "--mesh", "missing.json"], dir.path());
    assert_eq!(code(&o), 2);
    let o = abp(&["verify", "--geometry", "flat_disk", "--tol-jac", "0"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn verify_disk_and_sphere() {
    let dir = tempfile::tempdir().unwrap();
    let o = abp(&["verify", "--geometry", "flat_disk"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    let d = r["inequality"]["deficit"].as_f64().unwrap();
    assert!((d - 1.0).abs() < 0.02, "disk deficit {d}");
    assert_eq!(r["config"]["level"], 3);

    let o = abp(&["verify", "--geometry", "sphere"], dir.path());
    assert_eq!(code(&o), 0);
    let d = json(&o)["inequality"]["deficit"].as_f64().unwrap();
    assert!((d - 2.0).abs() < 0.02, "sphere deficit {d}");
}

#[test]
fn verify_reads_generated_mesh() {
    let dir = tempfile::tempdir().unwrap();
    let o = abp(&["generate", "--geometry", "flat_disk", "--level", "2", "-o", "d.json"], dir.path());
    assert_eq!(code(&o), 0);
    let o = abp(&["verify", "--mesh", "d.json", "--density", "1 + 0.5*x1^2", "--report", "r.json"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_json(&dir.path().join("r.json"));
    assert!(r["inequality"]["deficit"].as_f64().unwrap() > 1.0);
}

#[test]
fn abp_disk_and_catenoid() {
    let dir = tempfile::tempdir().unwrap();
    let o = abp(&["abp", "--geometry", "flat_disk", "--seed", "42", "--samples", "10000"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(&o);
    assert!(r["components"][0]["coverage"]["fraction"].as_f64().unwrap() >= 0.99);

    let o = abp(&["abp", "--geometry", "catenoid"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fixed_seed_reruns_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["abp", "--geometry", "flat_disk", "--level", "2", "--samples", "2000"];
    let a = abp(&[&args[..], &["-o", "a.json"]].concat(), dir.path());
    let b = abp(&[&args[..], &["--report", "b.json", "--threads", "1"]].concat(), dir.path());
    let c = abp(&args, dir.path());
    assert_eq!(code(&a), 0);
    assert_eq!(code(&b), 0);
    let a = std::fs::read(dir.path().join("a.json")).unwrap();
    let b = std::fs::read(dir.path().join("b.json")).unwrap();
    assert_eq!(a, b);
    assert_eq!(a, c.stdout);
}

#[test]
fn seed_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("run.json"),
        r#"{"geometry": {"name": "flat_disk"}, "level": 2, "seed": 3, "samples": 500}"#,
    )
    .unwrap();
    let seed = |extra: &[&str], env: Option<&str>| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_abp"));
        cmd.args(["abp", "--config", "run.json"]).args(extra).current_dir(dir.path());
        match env {
            Some(s) => cmd.env("ABP_SEED", s),
            None => cmd.env_remove("ABP_SEED"),
        };
        let o = cmd.output().unwrap();
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let r = json(&o);
        assert_eq!(r["config"]["samples"], 500);
        r["config"]["seed"].as_u64().unwrap()
    };
    assert_eq!(seed(&[], None), 3);
    assert_eq!(seed(&[], Some("7")), 7);
    assert_eq!(seed(&["--seed", "9"], Some("7")), 9);
}

#[test]
fn convergence_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = abp(&["convergence", "--geometry", "flat_disk", "--levels", "1..3", "-o", "t.csv"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = std::fs::read_to_string(dir.path().join("t.csv")).unwrap();
    let rows: Vec<&str> = table.lines().collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("level,"));
    assert!(rows[1].starts_with("1,") && rows[3].starts_with("3,"));
    let orders = std::fs::read_to_string(dir.path().join("t.orders.csv")).unwrap();
    let order = |name: &str| -> f64 {
        let line = orders.lines().find(|l| l.starts_with(&format!("{name},"))).unwrap();
        line.split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(order("deficit_error") >= 1.0);
    assert!(order("area_error") >= 1.9);
    let cfg = read_json(&dir.path().join("t.config.json"));
    assert_eq!(cfg["levels"], serde_json::json!([1, 3]));

    let o = abp(&["convergence", "--geometry", "catenoid", "--levels", "0..2", "-o", "c.json"], dir.path());
    assert_eq!(code(&o), 0);
    let r = read_json(&dir.path().join("c.json"));
    assert_eq!(r["table"]["rows"].as_array().unwrap().len(), 3);
    let h = &r["table"]["orders"]["mean_curvature_error"];
    assert!(h["order"].as_f64().unwrap() >= 1.0, "{h}");
}
