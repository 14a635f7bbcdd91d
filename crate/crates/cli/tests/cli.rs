use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn impact(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_impact"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn data_rows(csv: &str) -> usize {
    csv.lines().filter(|l| !l.starts_with('#')).count() - 1
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn detect_scenario(dir: &Path, config: &str, requests: &str, extra: &[&str]) -> Output {
    let cfg = fixture(config);
    let events = fixture("history.csv");
    let reqs = fixture(requests);
    let mut args = vec!["--config", &cfg, "detect", "--events", &events, "--requests", &reqs, "--out", s(dir)];
    args.extend_from_slice(extra);
    impact(&args)
}

#[test]
fn ingest_valid_logs() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&["ingest", &fixture("resident_a.txt"), &fixture("resident_b.txt"), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let events = read(&tmp.path().join("events.csv"));
    assert!(data_rows(&events) > 0);
    assert_eq!(data_rows(&read(&tmp.path().join("rejects.csv"))), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("rejects=0"));
}

#[test]
fn ingest_reports_bad_lines() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&["ingest", &fixture("bad_lines.txt"), "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0);
    assert_eq!(data_rows(&read(&tmp.path().join("rejects.csv"))), 3);
}

#[test]
fn ingest_missing_path_is_exit_2() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&["ingest", "/definitely/not/here.txt", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 2);
    assert!(!out.stderr.is_empty());
}

#[test]
fn ingest_with_augmentation_adds_events() {
    let tmp = TempDir::new().unwrap();
    let plain = tmp.path().join("plain");
    let aug = tmp.path().join("aug");
    impact(&["ingest", &fixture("resident_a.txt"), "--out", s(&plain)]);
    let out = impact(&["ingest", &fixture("resident_a.txt"), "--augment", "--out", s(&aug)]);
    assert_eq!(code(&out), 0);
    assert!(data_rows(&read(&aug.join("events.csv"))) > data_rows(&read(&plain.join("events.csv"))));
}

#[test]
fn detect_scenario_one() {
    let tmp = TempDir::new().unwrap();
    let out = detect_scenario(tmp.path(), "scenario1.toml", "scenario1_requests.csv", &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let report = read(&tmp.path().join("conflicts.jsonl"));
    let lines: Vec<serde_json::Value> = report.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 1);
    assert_eq!(lines[0]["user"], "R1");
    assert_eq!(lines[0]["attribute"], "temperature");
    assert_eq!(lines[0]["seed"], 42);
    assert_eq!(lines[0]["config_hash"].as_str().unwrap().len(), 64);
    let bands = read(&tmp.path().join("bands.csv"));
    assert!(bands.starts_with("# config_hash="));
    assert_eq!(data_rows(&bands), 1);
}

#[test]
fn gate_exit_codes() {
    let tmp = TempDir::new().unwrap();
    let hit = detect_scenario(&tmp.path().join("a"), "scenario2.toml", "scenario2_requests.csv", &["--gate"]);
    assert_eq!(code(&hit), 1);
    let quiet = detect_scenario(&tmp.path().join("b"), "scenario2_night.toml", "scenario2_requests.csv", &["--gate"]);
    assert_eq!(code(&quiet), 0);
    assert_eq!(read(&tmp.path().join("b/conflicts.jsonl")), "");
}

#[test]
fn empty_requests_give_empty_report() {
    let tmp = TempDir::new().unwrap();
    let empty = tmp.path().join("empty.csv");
    fs::write(&empty, "event_id,service,attribute,value,start,end,location,user\n").unwrap();
    let out = impact(&["detect", "--events", &fixture("history.csv"), "--requests", s(&empty)]);
    assert_eq!(code(&out), 0);
    assert!(out.stdout.is_empty());
}

#[test]
fn malformed_config_lists_every_field() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(
        &cfg,
        "[detection]\ntemporal_threshold = 2.0\n\n[detection.preference]\nmin_pts = 0\n\n[evaluation]\nrepetitions = 0\n",
    )
    .unwrap();
    let out = impact(&["--config", s(&cfg), "detect", "--events", &fixture("history.csv"), "--requests", &fixture("scenario1_requests.csv")]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    for field in ["temporal_threshold", "min_pts", "repetitions"] {
        assert!(err.contains(field), "{field} missing from: {err}");
    }
}

#[test]
fn unparseable_config_is_exit_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "seed = \"many\"\n").unwrap();
    let out = impact(&["--config", s(&cfg), "--print-config"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_flag_is_exit_2() {
    assert_eq!(code(&impact(&["detect", "--bogus"])), 2);
    assert_eq!(code(&impact(&[])), 2);
}

#[test]
fn no_preference_flags_any_deviation() {
    let tmp = TempDir::new().unwrap();
    let out = detect_scenario(tmp.path(), "scenario1.toml", "scenario1_requests.csv", &["--no-preference"]);
    assert_eq!(code(&out), 0);
    let report = read(&tmp.path().join("conflicts.jsonl"));
    let line: serde_json::Value = serde_json::from_str(report.lines().next().unwrap()).unwrap();
    assert_eq!(line["likelihood"], 1.0);
}

#[test]
fn print_config_round_trips() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&["--print-config", "--seed", "9"]);
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("seed = 9"));
    let cfg = tmp.path().join("printed.toml");
    fs::write(&cfg, &text).unwrap();
    let again = impact(&["--config", s(&cfg), "--print-config"]);
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn evaluate_writes_metrics_and_mae() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&["evaluate", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let metrics: serde_json::Value = serde_json::from_str(&read(&tmp.path().join("metrics.json"))).unwrap();
    assert!(metrics["accuracy"].is_f64());
    assert_eq!(metrics["seed"], 42);
    assert_eq!(metrics["runs"].as_array().unwrap().len(), 5);
    let mae = read(&tmp.path().join("mae.csv"));
    assert!(mae.starts_with("# config_hash="));
    assert!(mae.contains("property,class,mae_mean,mae_std,runs"));
}

#[test]
fn sweep_three_by_three() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&["sweep", "--grid", "0,0.5,0.9/1,0.5,0.1", "--out", s(tmp.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let csv = read(&tmp.path().join("sweep.csv"));
    assert_eq!(data_rows(&csv), 9);
    assert!(csv.contains("tau_t,tau_p,accuracy,precision_c,recall_c,f1_c,precision_nc,recall_nc,f1_nc"));
}

#[test]
fn sweep_rejects_bad_grid() {
    let tmp = TempDir::new().unwrap();
    assert_eq!(code(&impact(&["sweep", "--grid", "0,2/1", "--out", s(tmp.path())])), 2);
    assert_eq!(code(&impact(&["sweep", "--grid", "0,0.5", "--out", s(tmp.path())])), 2);
}

#[test]
fn explain_scenario_two() {
    let tmp = TempDir::new().unwrap();
    let out = impact(&[
        "--config",
        &fixture("scenario2.toml"),
        "explain",
        "--events",
        &fixture("history.csv"),
        "--requests",
        &fixture("scenario2_requests.csv"),
        "--out",
        s(tmp.path()),
    ]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value = serde_json::from_str(&read(&tmp.path().join("explain.json"))).unwrap();
    let item = &json[0];
    for key in ["impact", "pref_prox", "temp_prox", "raw_cl", "likelihood"] {
        assert!(item[key].is_f64(), "{key}");
    }
    let trace = read(&tmp.path().join(item["signal_file"].as_str().unwrap()));
    let rows: Vec<(String, f64)> = trace
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].to_string(), f[2].parse().unwrap())
        })
        .collect();
    let before: Vec<f64> = rows.iter().filter(|(t, _)| t.as_str() <= "2011-06-15T08:30:00.000").map(|r| r.1).collect();
    let after: Vec<f64> = rows.iter().filter(|(t, _)| t.as_str() > "2011-06-15T08:30:00.000").map(|r| r.1).collect();
    assert!(before.len() >= 2 && before.iter().all(|&v| v == 10.0), "{rows:?}");
    assert!(!after.is_empty() && after.iter().all(|&v| v == 30.0), "{rows:?}");
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        detect_scenario(dir, "scenario1.toml", "scenario1_requests.csv", &[]);
        impact(&["--seed", "5", "evaluate", "--out", s(dir)]);
        impact(&["--seed", "5", "sweep", "--grid", "0,0.8/1,0.4", "--out", s(dir)]);
        impact(&["--seed", "5", "ingest", &fixture("resident_a.txt"), "--augment", "--out", s(dir)]);
    }
    for name in ["conflicts.jsonl", "bands.csv", "metrics.json", "mae.csv", "sweep.csv", "events.csv", "rejects.csv"] {
        assert_eq!(read(&a.join(name)), read(&b.join(name)), "{name}");
    }
}

#[test]
fn seed_and_hash_are_recorded() {
    let tmp = TempDir::new().unwrap();
    impact(&["--seed", "11", "sweep", "--grid", "0/1", "--out", s(tmp.path())]);
    impact(&["--seed", "11", "ingest", &fixture("resident_a.txt"), "--out", s(tmp.path())]);
    for name in ["sweep.csv", "events.csv", "rejects.csv"] {
        let first = read(&tmp.path().join(name)).lines().next().unwrap().to_string();
        assert!(first.starts_with("# config_hash=") && first.ends_with(",seed=11"), "{name}: {first}");
    }
}
