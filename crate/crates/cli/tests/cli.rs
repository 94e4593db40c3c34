use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use spinlab_cli::config::parse_configs;
use spinlab_cli::pipeline::run_experiment;
use spinlab_cli::render;

fn spinlab(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(args)
        .env("SPINLAB_OUT_DIR", out)
        .output()
        .unwrap()
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p).unwrap()
}

const BATCH: &str = r#"
[[experiment]]
name = "circles"
truncation = 2
bounds = ["thm-q", "basic"]
[experiment.model]
kind = "product-of-circles"
radii = [1.0, 0.5]

[[experiment]]
name = "aux"
truncation = 2
bounds = ["twisted-basic", "twisted-energy-momentum"]
[experiment.model]
kind = "auxiliary-torus"
m = 2
n = 2
periods = [6.283185307179586, 6.283185307179586]
holonomy = [[0.5], [0.25]]
f = { kind = "constant", value = 0.7 }

[[experiment]]
name = "bare"
truncation = 1
[experiment.model]
kind = "flat-torus"
m = 2
n = 1
periods = [1.0, 2.0]
"#;

#[test]
fn sphere_equality_writes_zero_margins() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinlab(&["sphere-equality"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = read(dir.path().join("sphere-equality/summary.txt"));
    assert!(summary.contains("0.000000000000"));
    assert!(!summary.contains("FAIL"));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("sphere-equality/reports.json"))).unwrap();
    assert_eq!(json["schema_version"], 1);
    let reports = json["reports"].as_array().unwrap();
    assert!(!reports.is_empty());
    assert!(reports.iter().all(|r| r["hypothesis_ok"] == false && r["margin"].as_f64().unwrap().abs() < 1e-12));
    let csv = read(dir.path().join("sphere-equality/spectrum.csv"));
    assert!(csv.starts_with("index,mode,eigenvalue,weight\n"));
}

#[test]
fn batch_output_is_deterministic() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("batch.toml");
    fs::write(&cfg, BATCH).unwrap();
    let (a, b) = (work.path().join("a"), work.path().join("b"));
    for d in [&a, &b] {
        let out = spinlab(&["run", "--config", cfg.to_str().unwrap()], d);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    }
    for exp in ["circles", "aux", "bare"] {
        for file in ["reports.json", "summary.txt", "spectrum.csv"] {
            assert_eq!(read(a.join(exp).join(file)), read(b.join(exp).join(file)), "{exp}/{file}");
        }
    }
    let json: serde_json::Value = serde_json::from_str(&read(a.join("circles/reports.json"))).unwrap();
    let kinds: Vec<&str> = json["reports"].as_array().unwrap().iter().map(|r| r["bound_kind"].as_str().unwrap()).collect();
    let first_em = kinds.iter().position(|k| *k == "energy-momentum").unwrap();
    assert!(kinds[..first_em].iter().all(|k| *k == "basic"));
}

#[test]
fn empty_report_list_prints_only_the_header() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("bare.toml");
    fs::write(&cfg, "name = \"bare\"\ntruncation = 1\n[model]\nkind = \"flat-torus\"\nm = 2\nn = 1\nperiods = [1.0, 1.0]\n").unwrap();
    let out = spinlab(&["run", "--config", cfg.to_str().unwrap()], work.path());
    assert_eq!(out.status.code(), Some(0));
    let summary = read(work.path().join("bare/summary.txt"));
    let table: Vec<&str> = summary.lines().skip(2).take_while(|l| !l.is_empty()).collect();
    assert_eq!(table.len(), 1);
    assert!(table[0].starts_with("bound"));
}

#[test]
fn parse_errors_are_line_numbered_and_exit_two() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("bad.toml");
    fs::write(&cfg, "name = \"x\"\n[model]\nkind = \"sphere\"\nradius = 1.0\nbogus = 3\n").unwrap();
    let out = spinlab(&["run", "--config", cfg.to_str().unwrap()], work.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml:5:"), "{err}");
}

#[test]
fn invariant_failure_exits_one() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("strict.toml");
    fs::write(&cfg, "name = \"strict\"\nbounds = [\"basic\"]\n[model]\nkind = \"sphere\"\n[tolerances]\nresidual = 1e-30\n").unwrap();
    let out = spinlab(&["run", "--config", cfg.to_str().unwrap()], work.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(read(work.path().join("strict/summary.txt")).contains("FAIL restricted parallel spinors"));
}

#[test]
fn unsatisfied_hypotheses_do_not_fail_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinlab(&["torus", "--r1", "1", "--r2", "1", "--bound", "thm-q,basic", "-K", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(dir.path().join("torus/reports.json"))).unwrap();
    assert!(json["reports"].as_array().unwrap().iter().any(|r| r["hypothesis_ok"] == false));
}

#[test]
fn flag_overrides_environment_and_config() {
    let work = tempfile::tempdir().unwrap();
    let cfg = work.path().join("s.toml");
    let from_cfg = work.path().join("cfg-dir");
    fs::write(&cfg, format!("name = \"s\"\n[model]\nkind = \"sphere\"\n[output]\ndir = {:?}\n", from_cfg)).unwrap();
    let env_dir = work.path().join("env-dir");
    let flag_dir = work.path().join("flag-dir");
    let out = spinlab(&["--out", flag_dir.to_str().unwrap(), "run", "--config", cfg.to_str().unwrap()], &env_dir);
    assert_eq!(out.status.code(), Some(0));
    assert!(flag_dir.join("s/reports.json").exists());
    let out = spinlab(&["run", "--config", cfg.to_str().unwrap()], &env_dir);
    assert_eq!(out.status.code(), Some(0));
    assert!(env_dir.join("s/reports.json").exists());
    let out = Command::new(env!("CARGO_BIN_EXE_spinlab"))
        .args(["run", "--config", cfg.to_str().unwrap()])
        .env_remove("SPINLAB_OUT_DIR")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(from_cfg.join("s/reports.json").exists());
}

#[test]
fn verify_algebra_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = spinlab(&["verify-algebra", "--max-dim", "6"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("PASS clifford identities"));
}

#[test]
fn failing_rows_are_flagged() {
    let cfg = parse_configs("c", "name = \"c\"\ntruncation = 1\nbounds = [\"thm-q\"]\n[model]\nkind = \"product-of-circles\"\nradii = [1.0, 1.0]\n")
        .unwrap()
        .remove(0);
    let mut outcome = run_experiment(&cfg).unwrap();
    assert!(outcome.reports.len() >= 2);
    outcome.reports[0].hypothesis_ok = true;
    outcome.reports[0].margin = -1.0;
    outcome.reports[1].hypothesis_ok = false;
    outcome.reports[1].margin = -1.0;
    let table = render::table(&outcome.reports, 1e-9);
    let flagged: Vec<usize> = table.lines().skip(1).enumerate().filter(|(_, l)| l.contains(" FAIL ")).map(|(k, _)| k).collect();
    assert_eq!(flagged, vec![0]);
}

#[test]
fn shipped_batch_config_parses() {
    let cfgs = parse_configs("batch.toml", include_str!("../../../configs/batch.toml")).unwrap();
    assert_eq!(cfgs.len(), 3);
}
