use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use proptest::prelude::*;
use serde_json::Value;

fn phaseshift(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phaseshift"))
        .args(args)
        .env_remove("PHASESHIFT_CACHE_DIR")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = phaseshift(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small config so the parametric null tables stay cheap.
fn small_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    fs::write(&path, "[null_table]\nreplicates = 200\n[oscillator]\nduration_s = 10.0\nshifts = 3\n").unwrap();
    path
}

#[test]
fn rerun_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["--out-dir", s(&a), "--seed", "11", "simulate-oscillator", "--duration", "8", "--shifts", "4"]);
    ok(&["--out-dir", s(&b), "rerun", s(&a.join("manifest.json"))]);
    for f in ["signal.csv", "truth.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn config_file_and_flags_layer() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path());
    ok(&["--config", s(&cfg), "--out-dir", s(dir.path()), "simulate-oscillator", "--shifts", "2"]);
    let m = json(&dir.path().join("manifest.json"));
    assert_eq!(m["config"]["oscillator"]["duration_s"], 10.0);
    assert_eq!(m["config"]["oscillator"]["shifts"], 2);
    assert_eq!(m["config"]["seed"], 2024);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = s(dir.path());
    let bad_alpha = phaseshift(&["--out-dir", out, "--alpha", "1.5", "simulate-oscillator"]);
    assert_eq!(bad_alpha.status.code(), Some(2));
    let missing = phaseshift(&["--out-dir", out, "detect", "--input", "no-such-file.csv"]);
    assert_eq!(missing.status.code(), Some(3));
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[detector]\nalfa = 0.1\n").unwrap();
    let unknown = phaseshift(&["--config", s(&cfg), "--out-dir", out, "simulate-oscillator"]);
    assert_eq!(unknown.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&unknown.stderr).contains("alfa"));
    let bad_grid = phaseshift(&["--out-dir", out, "calibrate", "--kind", "power", "--grid", "snr=1..2"]);
    assert_eq!(bad_grid.status.code(), Some(2));
}

#[test]
fn zero_shifts_give_empty_truth() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["--out-dir", s(dir.path()), "simulate-oscillator", "--shifts", "0", "--duration", "5"]);
    let t = json(&dir.path().join("truth.json"));
    assert_eq!(t["events"].as_array().unwrap().len(), 0);
    assert_eq!(t["n_samples"], t["analysis_start"].as_u64().unwrap() + 1250);
}

#[test]
fn detect_and_evaluate_recover_planted_shifts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = small_config(d);
    let cache = d.join("cache");
    let signal = d.join("signal.csv");
    ok(&["--config", s(&cfg), "--out-dir", s(d), "--seed", "3", "simulate-oscillator", "--snr-db", "20"]);
    let detect = [
        "--config",
        s(&cfg),
        "--out-dir",
        s(d),
        "--cache-dir",
        s(&cache),
        "detect",
        "--input",
        s(&signal),
        "--alphas",
        "0.01,0.05,0.1",
    ];
    ok(&detect);
    assert_eq!(json(&d.join("events.json"))["metadata"]["null_table"], "miss");
    ok(&detect);
    let events = json(&d.join("events.json"));
    assert_eq!(events["metadata"]["null_table"], "hit");
    assert_eq!(events["runs"].as_array().unwrap().len(), 3);
    ok(&[
        "--config",
        s(&cfg),
        "--out-dir",
        s(d),
        "evaluate",
        "--events",
        s(&d.join("events.json")),
        "--truth",
        s(&d.join("truth.json")),
    ]);
    let r = json(&d.join("report.json"));
    let at_05 = &r["per_alpha"][1];
    assert_eq!(at_05["alpha"], 0.05);
    // the second planted shift is a small step 282 samples after a large one
    assert_eq!(at_05["counts"]["tp"], 2);
    assert_eq!(at_05["counts"]["fn"], 1);
    assert_eq!(at_05["counts"]["fp"], 0);
    assert_eq!(r["roc"]["max_accuracy"][0], 0.95);
    assert!(r["power_law_error"].is_string());
}

#[test]
fn evaluating_nothing_against_nothing_is_perfect() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--out-dir", s(d), "simulate-oscillator", "--shifts", "0", "--duration", "5"]);
    ok(&["--out-dir", s(d), "--method", "pd-threshold", "detect", "--input", s(&d.join("signal.csv")), "--alpha", "0.001"]);
    let events = json(&d.join("events.json"));
    assert_eq!(events["runs"][0]["events"].as_array().unwrap().len(), 0);
    ok(&["--out-dir", s(d), "evaluate", "--events", s(&d.join("events.json")), "--truth", s(&d.join("truth.json"))]);
    let r = json(&d.join("report.json"));
    assert_eq!(r["per_alpha"][0]["accuracy"], 1.0);
    assert!(r.get("roc").is_none());
}

#[test]
fn rate_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--out-dir", s(d), "simulate-oscillator", "--shifts", "0", "--duration", "5"]);
    ok(&["--out-dir", s(d), "--method", "pd-threshold", "detect", "--input", s(&d.join("signal.csv"))]);
    let truth = d.join("truth.json");
    let mut t = json(&truth);
    t["rate_hz"] = 500.0.into();
    fs::write(&truth, t.to_string()).unwrap();
    let out = phaseshift(&["--out-dir", s(d), "evaluate", "--events", s(&d.join("events.json")), "--truth", s(&truth)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn rossler_pipeline_runs_on_poincare_phase() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&["--out-dir", s(d), "simulate-rossler", "--duration", "60", "--delta-omega", "0.675"]);
    let t = json(&d.join("truth.json"));
    // a large mismatch keeps the pair drifting, so slips are frequent
    assert!(t["events"].as_array().unwrap().len() > 10);
    ok(&[
        "--out-dir",
        s(d),
        "--method",
        "pd-threshold",
        "detect",
        "--input",
        s(&d.join("poincare.csv")),
        "--channels",
        "difference",
        "--phase-input",
    ]);
    let e = json(&d.join("events.json"));
    assert_eq!(e["metadata"]["group_delay"], 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn manifest_rerun_is_byte_identical(seed in any::<u64>(), shifts in 0usize..6, secs in 2u32..8) {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        let seed = seed.to_string();
        let secs = secs.to_string();
        let shifts = shifts.to_string();
        ok(&["--out-dir", s(&a), "--seed", &seed, "simulate-oscillator", "--duration", &secs, "--shifts", &shifts]);
        ok(&["--out-dir", s(&b), "rerun", s(&a.join("manifest.json"))]);
        for f in ["signal.csv", "truth.json", "manifest.json"] {
            prop_assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
        }
    }
}
