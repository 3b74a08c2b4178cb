use std::path::Path;
use std::process::{Command, Output};

use cusp_cli::config::{Experiment, ExperimentConfig};
use serde_json::Value;

fn cusplab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cusplab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timestamp(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("timestamp");
    v
}

fn quick_conformal(dir: &Path) -> std::path::PathBuf {
    let cfg = dir.join("quick.json");
    std::fs::write(&cfg, r#"{"pairs": 2000, "boundary_samples": 500}"#).unwrap();
    cfg
}

#[test]
fn alpha_outside_unit_interval_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let o = cusplab(&["green-profile", "--alpha", "1.5", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("alpha") && err.contains("(0,1)"), "{err}");
    // Nothing was computed or written.
    assert!(!out.exists());
}

#[test]
fn validation_names_config_file_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"t_points": 1}"#).unwrap();
    let o = cusplab(&["green-profile", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("t_points"));

    std::fs::write(&cfg, r#"{"pairs": -3}"#).unwrap();
    let o = cusplab(&["conformal-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("pairs"));
}

#[test]
fn same_seed_gives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_conformal(dir.path());
    let out = dir.path().join("run");
    let args = [
        "conformal-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--seed",
        "9",
    ];
    assert_eq!(cusplab(&args).status.code(), Some(0));
    let first = without_timestamp(read_json(&out.join("report.json")));
    let first_csv = std::fs::read(out.join("image_profile.csv")).unwrap();
    assert_eq!(cusplab(&args).status.code(), Some(0));
    let second = without_timestamp(read_json(&out.join("report.json")));
    assert_eq!(
        serde_json::to_string_pretty(&first).unwrap(),
        serde_json::to_string_pretty(&second).unwrap()
    );
    assert_eq!(first_csv, std::fs::read(out.join("image_profile.csv")).unwrap());
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_conformal(dir.path());
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}"));
        let o = cusplab(&[
            "conformal-check",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--threads",
            threads,
        ]);
        assert_eq!(o.status.code(), Some(0));
        let r = read_json(&out.join("report.json"));
        (
            r["metrics"].clone(),
            r["gates"].clone(),
            std::fs::read(out.join("plot.dat")).unwrap(),
        )
    };
    assert_eq!(run("1"), run("4"));
}

#[test]
fn different_seed_changes_the_scan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_conformal(dir.path());
    let scan = |seed: &str| {
        let out = dir.path().join(seed);
        cusplab(&[
            "conformal-check",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        read_json(&out.join("report.json"))["metrics"]["collision_scan"]["min_quotient"].clone()
    };
    assert_ne!(scan("1"), scan("2"));
}

#[test]
fn config_round_trips_through_json() {
    for e in [
        Experiment::GreenProfile,
        Experiment::ConformalCheck,
        Experiment::BarrierCheck,
        Experiment::HopfCertify,
        Experiment::ExhaustionSim,
        Experiment::CapacityScan,
    ] {
        let mut cfg = ExperimentConfig::defaults(e);
        cfg.seed = 123_456_789_012;
        cfg.grid_h = 1.0 / 3.0 * 1e-3;
        cfg.c = 0.1 + 0.2;
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
        assert_eq!(
            ExperimentConfig::from_json_over_defaults(e, &cfg.to_json()).unwrap(),
            cfg
        );
    }
}

#[test]
fn report_embeds_a_config_that_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a");
    assert_eq!(
        cusplab(&["exhaustion-sim", "--out", out.to_str().unwrap(), "--seed", "5"])
            .status
            .code(),
        Some(0)
    );
    let report = read_json(&out.join("report.json"));
    let cfg_path = dir.path().join("embedded.json");
    std::fs::write(&cfg_path, report["config"].to_string()).unwrap();
    // Same file, same output dir: identical report apart from the timestamp.
    assert_eq!(
        cusplab(&["exhaustion-sim", "--config", cfg_path.to_str().unwrap()])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        without_timestamp(report),
        without_timestamp(read_json(&out.join("report.json")))
    );
}

#[test]
fn green_profile_defaults_report_decay_and_invariance() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("g");
    let o = cusplab(&["green-profile", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let r = read_json(&out.join("report.json"));
    let decay = r["metrics"]["decay_constant"].as_f64().unwrap();
    let a = r["metrics"]["hopf_constant"].as_f64().unwrap();
    assert!((decay / a - 1.0).abs() <= 0.2, "{decay} vs {a}");
    assert_eq!(r["metrics"]["invariance_holds"], Value::Bool(true));
    assert_eq!(r["gates"]["conformal_invariance"], Value::Bool(true));
    assert_eq!(r["pass"], Value::Bool(true));
    assert!(r["timestamp"].is_u64());

    let csv = std::fs::read_to_string(out.join("profile.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    let plot = std::fs::read_to_string(out.join("plot.dat")).unwrap();
    assert!(!plot.contains('\r'));
    let (header, data): (Vec<&str>, Vec<&str>) = plot.lines().partition(|l| l.starts_with('#'));
    assert!(!header.is_empty());
    assert_eq!(data.len(), 12);
    for l in data {
        let cols: Vec<f64> = l.split_whitespace().map(|v| v.parse().unwrap()).collect();
        assert_eq!(cols.len(), 2);
    }
}

#[test]
fn failing_gate_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("b.json");
    // h_B stops satisfying the concavity condition past u ≈ 0.0547.
    std::fs::write(&cfg, r#"{"u0": 0.1, "region_radius": 0.05, "grid_h": 1e-3}"#).unwrap();
    let out = dir.path().join("b");
    let o = cusplab(&[
        "barrier-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let r = read_json(&out.join("report.json"));
    assert_eq!(r["gates"]["concavity"], Value::Bool(false));
    assert_eq!(r["gates"]["smooth"], Value::Bool(true));
    assert_eq!(r["pass"], Value::Bool(false));
}

#[test]
fn computation_error_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("r");
    // The reference constants leave too few representable terms for the
    // patch model.
    let cfg = dir.path().join("r.json");
    std::fs::write(&cfg, r#"{"preset": "reference"}"#).unwrap();
    let o = cusplab(&[
        "exhaustion-sim",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(String::from_utf8_lossy(&o.stderr).contains("exhaustion-sim failed"));
}

fn write_report(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let out = dir.join(name);
    let mut all = args.to_vec();
    all.extend(["--out", out.to_str().unwrap()]);
    cusplab(&all);
    out.join("report.json")
}

#[test]
fn summary_rows_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let quick = quick_conformal(d);
    let bad_cfg = d.join("bad.json");
    std::fs::write(&bad_cfg, r#"{"u0": 0.1, "region_radius": 0.05, "grid_h": 1e-3}"#).unwrap();
    let ok1 = write_report(d, "c", &["conformal-check", "--config", quick.to_str().unwrap()]);
    let ok2 = write_report(d, "e", &["exhaustion-sim"]);
    let ok3 = write_report(d, "b", &["barrier-check"]);
    let failed = write_report(d, "f", &["barrier-check", "--config", bad_cfg.to_str().unwrap()]);
    let malformed = d.join("broken.json");
    std::fs::write(&malformed, "{ not json").unwrap();
    let s = |p: &[&Path]| {
        let args: Vec<&str> = std::iter::once("summary")
            .chain(p.iter().map(|x| x.to_str().unwrap()))
            .collect();
        cusplab(&args)
    };

    let o = s(&[&ok1, &ok2, &ok3]);
    assert_eq!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.split(',').nth(5) == Some("pass")), "{csv}");
    assert!(rows[0].starts_with("conformal-check,consistency,"));

    let o = s(&[&ok1, &failed]);
    assert_eq!(o.status.code(), Some(1));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert_eq!(csv.lines().nth(2).unwrap().split(',').nth(5), Some("fail"));

    let o = s(&[&ok1, &malformed]);
    assert_ne!(o.status.code(), Some(0));
    let csv = String::from_utf8(o.stdout).unwrap();
    assert!(csv.lines().nth(2).unwrap().contains("parse_error"));
    assert!(csv.lines().nth(1).unwrap().contains(",pass,"));

    let missing = d.join("nope.json");
    assert!(String::from_utf8(s(&[&missing]).stdout)
        .unwrap()
        .contains("parse_error"));

    let o = cusplab(&["summary"]);
    assert_eq!(o.status.code(), Some(2));

    let out = d.join("sum");
    let o = cusplab(&["summary", "--out", out.to_str().unwrap(), ok1.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(std::fs::read(out.join("summary.csv")).unwrap(), o.stdout);
}
