use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn catbranch(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_catbranch")).args(args).output().expect("binary runs")
}

fn run_with(sub: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![sub, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    catbranch(&args)
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn summary(path: PathBuf) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

const SMALL_CYCLIC: &str = r#"{
  "model": {"d": 2, "family": {"kind": "cyclic", "params": {"gamma": [1, 1]}}},
  "sim": {"n_paths": 200, "seed": 1},
  "experiment": {"lipschitz": {"n_pairs": 5000}}
}"#;

#[test]
fn check_conditions_on_log_passes() {
    let out = tempfile::tempdir().unwrap();
    let o = run_with("check-conditions", &configs().join("cyclic.json"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path().join("check-conditions-cyclic-7.json"));
    let origin = s["report"]["origin"].as_array().unwrap();
    assert_eq!(origin.len(), 3);
    assert!(origin.iter().all(|r| r["verdict"] == "pass"));
    assert_eq!(s["config"]["sim"]["seed"], 7);
    assert!(out.path().join("check-conditions-cyclic-7.csv").exists());
}

#[test]
fn failing_modulus_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "p.json",
        r#"{"model": {"d": 2, "family": {"kind": "cyclic", "params": {"gamma": [1, 1]}}},
            "modulus": {"family": {"kind": "power_law", "params": 1.0}},
            "experiment": {"lipschitz": {"n_pairs": 100}}}"#,
    );
    let o = run_with("check-conditions", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn gronwall_fixture_passes_with_plot() {
    let out = tempfile::tempdir().unwrap();
    let o = run_with("gronwall", &configs().join("cyclic.json"), out.path(), &["--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path().join("gronwall-cyclic-7.json"));
    let grid = s["report"]["grid"].as_array().unwrap();
    for g in grid.iter().skip(1) {
        assert!(g["log_estimate"].as_f64().unwrap() < g["log_bound"].as_f64().unwrap());
    }
    let svg = fs::read_to_string(out.path().join("gronwall-cyclic-7.svg")).unwrap();
    let lines: Vec<&str> = svg.lines().filter(|l| l.starts_with("<polyline")).collect();
    assert_eq!(lines.len(), 2);
    // SVG y grows downward: every estimate vertex after t = 0 lies strictly below the bound's
    let ys = |l: &str| -> Vec<f64> {
        let pts = l.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        pts.split(' ').map(|p| p.split(',').nth(1).unwrap().parse().unwrap()).collect()
    };
    let (est, bound) = (ys(lines[0]), ys(lines[1]));
    assert_eq!(est.len(), bound.len());
    assert!(est.iter().zip(&bound).skip(1).all(|(e, b)| e > b));
    assert!(svg.contains("log Phi_delta(zeta_0) + K t"));
}

#[test]
fn misconfigured_band_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "g.json",
        r#"{"model": {"d": 2, "family": {"kind": "cyclic", "params": {"gamma": [1, 1]}}},
            "initial": [0.5, 0.5], "modulus": {"epsilon": 0.9},
            "sim": {"n_paths": 20}, "experiment": {"lipschitz": {"n_pairs": 100}}}"#,
    );
    assert_eq!(run_with("gronwall", &cfg, dir.path(), &[]).status.code(), Some(3));
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "s.json",
        r#"{"model": {"d": 2, "family": {"kind": "cyclic", "params": {"gamma": [1, 1]}}},
            "sim": {"n_paths": 1, "seed": 42}}"#,
    );
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(run_with("simulate", &cfg, &a, &[]).status.code(), Some(0));
    assert_eq!(run_with("simulate", &cfg, &b, &[]).status.code(), Some(0));
    let read = |d: &Path| fs::read(d.join("simulate-cyclic-42.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
    let text = String::from_utf8(read(&a)).unwrap();
    assert!(text.starts_with("t,x_1,x_2\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 102);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CYCLIC);
    let o = run_with("simulate", &cfg, dir.path(), &["--seed", "99"]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(dir.path().join("simulate-cyclic-99.json"));
    assert_eq!(s["config"]["sim"]["seed"], 99);
    let csv = fs::read_to_string(dir.path().join("simulate-cyclic-99.csv")).unwrap();
    assert!(csv.starts_with("path,t,x_1,x_2\n"));
}

#[test]
fn bad_config_exits_1_with_all_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"model": {"d": 2, "family": {"kind": "cyclic", "params": {"gamma": [1, -2]}}},
            "sim": {"dt": 2.0, "T": 1.0}}"#,
    );
    let o = run_with("simulate", &cfg, dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("gamma[1]") && err.contains("sim.dt"), "{err}");
    let unknown = write_config(dir.path(), "u.json", r#"{"model": {"d": 1, "family": {"kind": "constant", "params": {"values": [1]}}}, "outputs": {}}"#);
    assert_eq!(run_with("simulate", &unknown, dir.path(), &[]).status.code(), Some(1));
    assert_eq!(run_with("simulate", &dir.path().join("missing.json"), dir.path(), &[]).status.code(), Some(1));
}

#[test]
fn other_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", SMALL_CYCLIC);
    for sub in ["couple", "martingale", "continuity", "explosion"] {
        let o = run_with(sub, &cfg, dir.path(), &["--plot"]);
        assert_eq!(o.status.code(), Some(0), "{sub}: {}", String::from_utf8_lossy(&o.stderr));
        for ext in ["json", "csv", "svg"] {
            assert!(dir.path().join(format!("{sub}-cyclic-1.{ext}")).exists(), "{sub}.{ext}");
        }
    }
    let names: Vec<String> = fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert!(names.iter().all(|n| !n.starts_with(".tmp")), "{names:?}");
}

#[test]
fn cascade_finds_a_joint_trap() {
    let out = tempfile::tempdir().unwrap();
    let o = run_with("cascade", &configs().join("cascade.json"), out.path(), &["--plot"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(out.path().join("cascade-cyclic-trap-3.json"));
    assert!(s["report"]["cascade"]["trapped_component"].is_number());
}

#[test]
fn explosion_dichotomy_fixture() {
    let out = tempfile::tempdir().unwrap();
    let o = run_with("explosion", &configs().join("radial.json"), out.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let s = summary(out.path().join("explosion-radial-10.json"));
    assert!(s["report"]["explosions"].as_u64().unwrap() > 0);
    assert_eq!(s["report"]["expect_explosions"], true);
}
