//! The `vrlab` binary end to end: flags, files and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use vrlab_cli::config::RunConfig;

fn vrlab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vrlab")).args(args).current_dir(cwd).output().expect("binary runs")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn simulate_writes_one_row_per_sample() {
    let dir = tempfile::tempdir().unwrap();
    let out = vrlab(
        &["simulate", "--calculator", "A", "--duration", "60", "--sensor-dt", "0.01", "--quantum", "1e-3", "--out", "a.csv"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,x,y"));
    assert_eq!(lines.count(), 6001);
}

#[test]
fn simulate_b_partial_shows_only_the_observed_disk() {
    let dir = tempfile::tempdir().unwrap();
    let out = vrlab(&["simulate", "--calculator", "B_partial", "--duration", "5"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().next(), Some("t,x1,y1"));
    assert!(text.lines().skip(1).all(|l| l.split(',').count() == 3));
}

#[test]
fn usage_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [&["simulate"][..], &["simulate", "--calculator", "Q"], &["classify", "--trajectory", "a.csv"], &[]] {
        let out = vrlab(args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
    }
    assert!(stderr(&vrlab(&["simulate"], dir.path())).contains("--calculator"));
}

#[test]
fn classify_reproduces_the_passive_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    for (id, file) in [("A", "a.csv"), ("B_partial", "b.csv")] {
        assert!(vrlab(&["simulate", "--calculator", id, "--out", file], d).status.success());
    }
    let out = vrlab(&["classify", "--trajectory", "a.csv", "--calculator", "A", "--out", "a.json"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    let v = json(&d.join("a.json"));
    assert_eq!((v["physicality"].as_str(), v["agreement"].as_str()), (Some("PhysicalAsDeclared"), Some("Agrees")));

    // the declaration may also come from a file
    let decl = vrlab_core::calculators::build::<f64>(
        vrlab_core::calculators::CalculatorId::BPartial,
        &vrlab_core::calculators::CatalogParams::default(),
    )
    .unwrap()
    .declaration;
    std::fs::write(d.join("decl.json"), serde_json::to_string(&decl).unwrap()).unwrap();
    let out = vrlab(&["classify", "--trajectory", "b.csv", "--declaration", "decl.json"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["physicality"], "NonPhysicalHiddenVariables");
    assert_eq!(v["agreement"], "Disagrees");
}

#[test]
fn classify_refuses_short_or_broken_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert!(vrlab(&["simulate", "--calculator", "A", "--out", "a.csv"], d).status.success());
    let full = std::fs::read_to_string(d.join("a.csv")).unwrap();

    let short: Vec<&str> = full.lines().take(51).collect();
    std::fs::write(d.join("short.csv"), short.join("\n")).unwrap();
    let out = vrlab(&["classify", "--trajectory", "short.csv", "--calculator", "A"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("insufficient evidence"), "{}", stderr(&out));

    let mut broken: Vec<String> = full.lines().map(str::to_string).collect();
    broken[99] = "0.98,1.2".into();
    std::fs::write(d.join("broken.csv"), broken.join("\n")).unwrap();
    let out = vrlab(&["classify", "--trajectory", "broken.csv", "--calculator", "A"], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 100"), "{}", stderr(&out));
}

#[test]
fn probe_falsifies_h_and_passes_f() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let out = vrlab(&["probe", "--calculator", "H", "--plan", "stop_and_release", "--out", "h.json"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&d.join("h.json"));
    assert_eq!(report["falsified"], true);
    assert_eq!(report["probes"][0]["pass"], false);
    let verdict = json(&d.join("h.verdict.json"));
    assert_eq!(verdict["agreement"], "Disagrees");
    assert_eq!(report["passive"]["agreement"], "Agrees");

    let out = vrlab(&["probe", "--calculator", "F", "--plan", "force_schedule", "--out", "f.json"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&d.join("f.json"));
    assert_eq!(report["falsified"], false);
    assert_eq!(report["probes"][0]["pass"], true);
    assert_eq!(json(&d.join("f.verdict.json"))["agreement"], "Agrees");
}

#[test]
fn probe_accepts_a_plan_file() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let plan = vrlab_core::prober::ProbePlan::stop_and_release();
    std::fs::write(d.join("plan.json"), serde_json::to_string(&plan).unwrap()).unwrap();
    let out = vrlab(&["probe", "--calculator", "H", "--plan-file", "plan.json", "--verdict-out", "v.json"], d);
    assert!(out.status.success(), "{}", stderr(&out));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["falsified"], true);
    assert!(d.join("v.json").exists());
}

#[test]
fn probe_without_a_controller_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = vrlab(&["probe", "--calculator", "A", "--plan", "force_schedule"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("no controller"), "{}", stderr(&out));
    let out = vrlab(&["probe", "--calculator", "E"], dir.path());
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn coarse_suite_carries_low_evidence_warnings() {
    let dir = tempfile::tempdir().unwrap();
    let out = vrlab(&["suite", "--quantum", "0.1", "--out", "coarse.json", "--table-out", "coarse.txt"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("warning: low evidence"), "{table}");
    assert_eq!(std::fs::read_to_string(dir.path().join("coarse.txt")).unwrap(), table);
    let report = json(&dir.path().join("coarse.json"));
    assert_eq!(report["config"]["sensor"]["quantum"], 0.1);
    let warned = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["passive"]["diagnostics"].as_array().unwrap().iter().any(|d| d.as_str().unwrap().contains("low evidence")))
        .count();
    assert_eq!(warned, 10);
}

#[test]
fn default_suite_matches_every_expected_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let out = vrlab(&["suite", "--out", "suite.json"], dir.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let report = json(&dir.path().join("suite.json"));
    let rows = report["rows"].as_array().unwrap();
    let ids: Vec<&str> = rows.iter().map(|r| r["calculator"].as_str().unwrap()).collect();
    assert_eq!(ids, ["A", "B_full", "B_partial", "C", "D", "E", "F", "G", "H", "X"]);
    for r in rows {
        assert_eq!(r["matches_paper"], true, "{}", r["calculator"]);
        assert!(r["error"].is_null());
    }
    assert_eq!(rows[0]["active"], "n/a");
    assert_eq!(report["config_fingerprint"], RunConfig::default().fingerprint());
    let stamp = report["generated_at"].as_str().unwrap();
    assert!(chrono_like(stamp), "{stamp}");
}

fn chrono_like(s: &str) -> bool {
    s.len() == 20 && s.ends_with('Z') && s.as_bytes()[10] == b'T'
}

#[test]
fn broken_config_fails_the_suite_rows() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), r#"{"params": {"orbit_radius": -1.0}}"#).unwrap();
    let out = vrlab(&["suite", "--config", "bad.json", "--out", "s.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("E"), "{}", stderr(&out));
    let report = json(&dir.path().join("s.json"));
    let failed: Vec<&str> = report["rows"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| !r["error"].is_null())
        .map(|r| r["calculator"].as_str().unwrap())
        .collect();
    assert!(failed.contains(&"E") && failed.contains(&"H"), "{failed:?}");
}

#[test]
fn print_defaults_round_trips_as_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = vrlab(&["--print-defaults"], dir.path());
    assert!(out.status.success());
    let printed: RunConfig = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed, RunConfig::default());
    std::fs::write(dir.path().join("c.json"), &out.stdout).unwrap();
    let sim = vrlab(&["simulate", "--calculator", "C", "--config", "c.json", "--duration", "2"], dir.path());
    assert!(sim.status.success(), "{}", stderr(&sim));
    let unknown = r#"{"sensor": {"quantum": 0.01}, "extra": 1}"#;
    std::fs::write(dir.path().join("u.json"), unknown).unwrap();
    let out = vrlab(&["simulate", "--calculator", "C", "--config", "u.json"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("extra"));
}
