use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cspdc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cspdc"))
        .args(args)
        .env_remove("CSPDC_CONFIG")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = cspdc(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn json(args: &[&str]) -> Value {
    serde_json::from_str(&ok(args)).expect("stdout is JSON")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn design_reports_first_period() {
    let csv = ok(&["design"]);
    let header: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    let col = header.iter().position(|&h| h == "period_um").unwrap();
    let first = csv.lines().find(|l| l.starts_with("first,")).unwrap();
    let period: f64 = first.split(',').nth(col).unwrap().parse().unwrap();
    assert!((period - 2.1).abs() < 0.21, "{period}");
    assert!(csv.contains("# table=parasitic"));

    let j = json(&["design", "--format", "json"]);
    assert_eq!(j["stages"][1]["label"], "second");
}

#[test]
fn broken_energy_conservation_names_the_stage() {
    let dir = tempfile::tempdir().unwrap();
    let text = cspdc::bundled::PROJECT_TOML.replacen("design_signal = \"796 nm\"", "design_signal = \"796 nm\"\ndesign_idler = \"900 nm\"", 1);
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, text).unwrap();
    let out = cspdc(&["design", "--config", p(&path)]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    assert_eq!(err["kind"], "validation");
    assert!(err["message"].as_str().unwrap().contains("stage first"), "{err}");
}

#[test]
fn config_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.toml");
    std::fs::write(&path, cspdc::bundled::PROJECT_TOML.replace("label = \"first\"", "label = \"uno\"").replace("stage = \"first\"", "stage = \"uno\"")).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_cspdc")).args(["design"]).env("CSPDC_CONFIG", &path).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("\nuno,"));
}

#[test]
fn unknown_stage_and_format_are_validation_errors() {
    for args in [&["spectrum", "--stage", "third"][..], &["design", "--format", "binary"], &["predict", "--bogus"]] {
        let out = cspdc(args);
        assert_eq!(out.status.code(), Some(1), "{args:?}");
        let err: Value = serde_json::from_slice(&out.stderr).unwrap();
        assert_eq!(err["kind"], "validation");
    }
}

#[test]
fn predict_reproduces_the_stated_efficiency() {
    let j = json(&["predict", "--format", "json"]);
    let e = j["stated"]["predicted_efficiency_hz_per_mw"].as_f64().unwrap();
    assert!((e / 524e3 - 1.0).abs() < 0.01, "{e}");
    assert!((j["row"]["second_stage"].as_f64().unwrap() - 4.4e-5).abs() < 1e-12);
    let text = ok(&["predict"]);
    assert!(text.contains("524.1 kHz/mW"), "{text}");
}

#[test]
fn spectrum_and_acceptance_csv() {
    let s = ok(&["spectrum", "--stage", "second"]);
    assert!(s.contains("# bandwidth_thz="));
    assert!(s.lines().filter(|l| !l.starts_with('#')).count() > 1000);
    let a = ok(&["acceptance"]);
    let fwhm: f64 = a.lines().next().unwrap().strip_prefix("# fwhm_nm=").unwrap().parse().unwrap();
    assert!((fwhm / 3.7 - 1.0).abs() < 0.15, "{fwhm}");
}

#[test]
fn two_hand_written_tags_make_one_count() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("two.csv");
    std::fs::write(&tags, "channel,timestamp_ps\n0,1000\n1,5000\n").unwrap();
    let hist = dir.path().join("hist.csv");
    let j = json(&["analyze", p(&tags), "--duration", "1", "--out", p(&hist)]);
    assert_eq!(j["total_counts"], 1);
    let text = std::fs::read_to_string(&hist).unwrap();
    let filled: Vec<&str> = text.lines().filter(|l| !l.starts_with('#') && !l.ends_with(",0")).collect();
    // column header plus the one occupied bin: 4000 ps falls in [3840, 4096)
    assert_eq!(filled, ["delay_ps,counts", "3840,1"]);
}

#[test]
fn unsorted_tags_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("bad.csv");
    std::fs::write(&tags, "0,5000\n1,1000\n").unwrap();
    let out = cspdc(&["analyze", p(&tags)]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    for format in ["binary", "csv"] {
        let a = dir.path().join(format!("a.{format}"));
        let b = dir.path().join(format!("b.{format}"));
        let c = dir.path().join(format!("c.{format}"));
        let base = ["simulate", "--scenario", "scaled", "--duration", "5", "--format", format];
        for (path, seed) in [(&a, "7"), (&b, "7"), (&c, "8")] {
            let mut args = base.to_vec();
            args.extend(["--seed", seed, "--out", p(path)]);
            ok(&args);
        }
        let (a, b, c) = (std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), std::fs::read(c).unwrap());
        assert!(a.len() > 1000);
        assert_eq!(a, b, "{format}");
        assert_ne!(a, c, "{format}");
    }
    let x = ok(&["design", "--format", "json"]);
    assert_eq!(x, ok(&["design", "--format", "json"]));
}

#[test]
fn simulate_then_analyze_recovers_the_rate() {
    let dir = tempfile::tempdir().unwrap();
    let tags = dir.path().join("run.tags");
    let summary = json(&["simulate", "--scenario", "scaled", "--duration", "600", "--seed", "3", "--out", p(&tags)]);
    assert_eq!(summary["seed"], 3);
    let j = json(&["analyze", p(&tags), "--scenario", "scaled"]);
    let (rate, sigma) = (j["result"]["rate_hz"].as_f64().unwrap(), j["result"]["sigma_hz"].as_f64().unwrap());

    let project = cspdc::config::ProjectConfig::bundled();
    let mut cfg = project.scenario("scaled").unwrap().config.clone();
    cfg.duration_s = 600.0;
    let truth = cspdc::sim::expected_coincidence_rate(&cfg, 0, 1).unwrap();
    assert!((rate - truth).abs() <= 3.0 * sigma, "{rate} ± {sigma} vs {truth}");
}

#[test]
fn closure_command_reports_the_pull() {
    let j = json(&["closure", "--scenario", "scaled", "--duration", "120", "--seed", "5"]);
    assert_eq!(j["scenario"], "scaled");
    assert!(j["pull"].as_f64().unwrap().abs() <= 3.0, "{j}");
}
