//! End-to-end runs of the `cvr-baseline` binary: synth -> estimate ->
//! report, byte-identical re-runs, and exit-code contracts.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cvr-baseline"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("spawn");
    assert!(
        out.status.success(),
        "command {:?} failed:\nstdout: {}\nstderr: {}",
        args,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn synth_args(dir: &Path) -> Vec<String> {
    [
        "synth",
        "--resolution",
        "60",
        "--days",
        "60",
        "--cvr-days",
        "2",
        "--seed",
        "9",
        "--context-len",
        "4",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out-dir".to_string(), dir.display().to_string()])
    .collect()
}

fn estimate_args(dir: &Path) -> Vec<String> {
    [
        "estimate",
        "--resolution",
        "60",
        "--eps-sim",
        "3",
        "--forecast-window",
        "4",
        "--context-len",
        "4",
        "--k-virtual",
        "3",
        "--n-estimators",
        "15",
        "--max-depth",
        "2",
        "--growth",
        "level-wise",
        "--seed",
        "9",
        "--derive-inline",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain([
        "--data".to_string(),
        dir.join("data.csv").display().to_string(),
        "--events".to_string(),
        dir.join("events.json").display().to_string(),
        "--out-dir".to_string(),
        dir.display().to_string(),
    ])
    .collect()
}

#[test]
fn synth_estimate_report_round_trip_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    run_ok(&synth_args(dir).iter().map(String::as_str).collect::<Vec<_>>());
    assert!(dir.join("data.csv").exists());
    assert!(dir.join("events.json").exists());
    assert!(dir.join("truth.json").exists());

    let est_args: Vec<String> = estimate_args(dir);
    let args: Vec<&str> = est_args.iter().map(String::as_str).collect();
    run_ok(&args);
    let report = dir.join("cvr_report.json");
    assert!(report.exists());
    let first_report = std::fs::read(&report).unwrap();
    let baselines: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| {
            let p = e.unwrap().path();
            let name = p.file_name().unwrap().to_string_lossy().to_string();
            (name.starts_with("baseline_") && name.ends_with(".csv")).then_some(p)
        })
        .collect();
    assert_eq!(baselines.len(), 2);
    let first_csv = std::fs::read(&baselines[0]).unwrap();

    // Identical config and inputs: outputs must be byte-identical.
    run_ok(&args);
    assert_eq!(first_report, std::fs::read(&report).unwrap(), "report changed on re-run");
    assert_eq!(first_csv, std::fs::read(&baselines[0]).unwrap(), "baseline changed on re-run");

    // Aggregate the per-event JSONs.
    let mut report_args = vec![
        "report".to_string(),
        "--out-dir".to_string(),
        dir.display().to_string(),
    ];
    for b in &baselines {
        report_args.push(b.with_extension("json").display().to_string());
    }
    run_ok(&report_args.iter().map(String::as_str).collect::<Vec<_>>());
    let summary = std::fs::read_to_string(dir.join("cvr_summary.csv")).unwrap();
    assert!(summary.starts_with("date,cvr_factor,delta_p_pct,delta_v_pct\n"));
    assert!(summary.contains("mean,"));
}

#[test]
fn estimate_without_weights_or_inline_derivation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let dir = dir.path();
    run_ok(&synth_args(dir).iter().map(String::as_str).collect::<Vec<_>>());
    let out = bin()
        .args([
            "estimate",
            "--resolution",
            "60",
            "--data",
            &dir.join("data.csv").display().to_string(),
            "--events",
            &dir.join("events.json").display().to_string(),
            "--out-dir",
            &dir.display().to_string(),
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    let last = stderr.lines().last().unwrap();
    let err: serde_json::Value = serde_json::from_str(last).expect("stderr JSON");
    assert_eq!(err["error"], "config");
}

#[test]
fn missing_data_file_exits_3() {
    let out = bin()
        .args([
            "estimate",
            "--resolution",
            "60",
            "--data",
            "/nonexistent/data.csv",
            "--derive-inline",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn bad_resolution_exits_2() {
    let out = bin()
        .args(["synth", "--resolution", "7", "--out-dir", "/tmp/unused"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
