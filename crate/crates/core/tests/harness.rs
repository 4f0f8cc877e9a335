//! End-to-end harness behaviour: determinism, report recomputation,
//! tamper detection and run comparison.

use std::fs;
use std::path::Path;

use ludobench::agents::ScriptedProfile;
use ludobench::harness::report::{EVENTS_FILE, REPORT_FILE, SUMMARY_CSV, SUMMARY_MD};
use ludobench::harness::suite::event_set;
use ludobench::harness::{compare_runs, emit_report, load_report, run_suite, AgentKind, AgentSpec, RunConfig};
use ludobench::tasks::bank::Bank;
use ludobench::Error;

fn scripted_config(seeds: Vec<u64>) -> RunConfig {
    let mut config = RunConfig::new(vec![
        AgentSpec::new(AgentKind::Scripted {
            profile: ScriptedProfile::rational(),
        }),
        AgentSpec::new(AgentKind::Scripted {
            profile: ScriptedProfile::loss_chaser(),
        }),
        AgentSpec::new(AgentKind::Uniform),
    ]);
    config.seeds = seeds;
    config
}

fn read(path: &Path) -> Vec<u8> {
    fs::read(path).unwrap()
}

#[test]
fn repeated_runs_are_byte_identical() {
    let config = scripted_config(vec![3, 4]);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_suite(&config, a.path()).unwrap();
    let rb = run_suite(&config, b.path()).unwrap();
    assert_eq!(read(&a.path().join(EVENTS_FILE)), read(&b.path().join(EVENTS_FILE)));
    assert_eq!(ra.run_id, rb.run_id);
    assert_eq!(ra.event_chain_tail, rb.event_chain_tail);
    assert_eq!(ra.summary, rb.summary);
    for file in [REPORT_FILE, SUMMARY_CSV, SUMMARY_MD] {
        assert!(a.path().join(file).is_file(), "{file} missing");
    }
}

#[test]
fn parallel_and_serial_runs_agree() {
    let serial = scripted_config(vec![0, 1, 2]);
    let mut parallel = serial.clone();
    parallel.parallelism = 4;
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ra = run_suite(&serial, a.path()).unwrap();
    let rb = run_suite(&parallel, b.path()).unwrap();
    assert_eq!(ra.run_id, rb.run_id);
    assert_eq!(event_set(a.path()).unwrap(), event_set(b.path()).unwrap());
    assert_eq!(read(&a.path().join(EVENTS_FILE)), read(&b.path().join(EVENTS_FILE)));
    assert_eq!(ra.per_seed, rb.per_seed);
}

#[test]
fn different_seeds_give_different_logs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_suite(&scripted_config(vec![0]), a.path()).unwrap();
    run_suite(&scripted_config(vec![1]), b.path()).unwrap();
    assert_ne!(read(&a.path().join(EVENTS_FILE)), read(&b.path().join(EVENTS_FILE)));
}

#[test]
fn report_recomputes_from_events() {
    let dir = tempfile::tempdir().unwrap();
    let original = run_suite(&scripted_config(vec![7]), dir.path()).unwrap();
    fs::remove_file(dir.path().join(SUMMARY_CSV)).unwrap();
    let again = emit_report(dir.path()).unwrap();
    assert!(dir.path().join(SUMMARY_CSV).is_file());
    assert_eq!(again.summary.len(), 3);
    let csv = fs::read_to_string(dir.path().join(SUMMARY_CSV)).unwrap();
    assert_eq!(csv.lines().count(), 1 + 3);
    assert_eq!(original.per_seed.len(), again.per_seed.len());
    for (a, b) in original.per_seed.iter().zip(&again.per_seed) {
        for (x, y) in a.metrics.values().iter().zip(b.metrics.values()) {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() <= 1e-12),
                (None, None) => {}
                other => panic!("metric presence differs: {other:?}"),
            }
        }
    }
}

#[test]
fn tampered_log_is_an_integrity_error() {
    let dir = tempfile::tempdir().unwrap();
    run_suite(&scripted_config(vec![0]), dir.path()).unwrap();
    let path = dir.path().join(EVENTS_FILE);
    let text = fs::read_to_string(&path).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    lines[4] = lines[4].replacen("\"step\":", "\"step\":1", 1);
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    match emit_report(dir.path()) {
        Err(Error::Integrity { line, .. }) => assert_eq!(line, 5),
        other => panic!("expected integrity error, got {other:?}"),
    }

    lines = text.lines().map(str::to_string).collect();
    lines.pop();
    fs::write(&path, lines.join("\n") + "\n").unwrap();
    let err = emit_report(dir.path()).unwrap_err();
    assert!(matches!(err, Error::Integrity { .. }));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn comparing_a_run_with_itself_gives_zero_deltas() {
    let dir = tempfile::tempdir().unwrap();
    run_suite(&scripted_config(vec![0, 1]), dir.path()).unwrap();
    let report = load_report(dir.path()).unwrap();
    let c = compare_runs(&report, &report).unwrap();
    assert!(!c.rows.is_empty());
    for row in &c.rows {
        assert_eq!(row.delta, 0.0, "{} {}", row.treatment_agent, row.metric);
    }
}

#[test]
fn incomparable_runs_are_rejected() {
    let base = tempfile::tempdir().unwrap();
    let seeds = tempfile::tempdir().unwrap();
    let bank = tempfile::tempdir().unwrap();
    run_suite(&scripted_config(vec![0, 1]), base.path()).unwrap();
    run_suite(&scripted_config(vec![0, 2]), seeds.path()).unwrap();

    let mut alt = Bank::default_bank();
    alt.probability_items.pop();
    let bank_path = bank.path().join("bank.json");
    fs::write(&bank_path, serde_json::to_string(&alt).unwrap()).unwrap();
    let mut config = scripted_config(vec![0, 1]);
    config.bank = Some(bank_path);
    let out = bank.path().join("run");
    run_suite(&config, &out).unwrap();

    let base = load_report(base.path()).unwrap();
    for other in [load_report(seeds.path()).unwrap(), load_report(&out).unwrap()] {
        let err = compare_runs(&base, &other).unwrap_err();
        assert!(matches!(err, Error::Comparability(_)), "{err:?}");
        assert_eq!(err.exit_code(), 2);
    }
}

#[test]
fn missing_bank_is_a_config_error() {
    let mut config = scripted_config(vec![0]);
    config.bank = Some("/nonexistent/bank.json".into());
    let err = run_suite(&config, tempfile::tempdir().unwrap().path()).unwrap_err();
    assert!(matches!(err, Error::Config(_)), "{err:?}");
    assert_eq!(err.exit_code(), 1);
}

#[test]
fn anti_chasing_wrapper_is_reported_separately() {
    let mut config = scripted_config(vec![0]);
    let mut wrapped = AgentSpec::new(AgentKind::Scripted {
        profile: ScriptedProfile::loss_chaser(),
    });
    wrapped.anti_chasing = true;
    config.agents.push(wrapped);
    let report = run_suite(&config, tempfile::tempdir().unwrap().path()).unwrap();
    let names: Vec<_> = report.summary.iter().map(|s| s.agent.as_str()).collect();
    assert!(names.contains(&"loss_chaser"));
    assert!(names.contains(&"loss_chaser+anti_chasing"));
}

#[test]
fn config_snapshot_replays_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut config = scripted_config(vec![5]);
    config.parallelism = 2;
    run_suite(&config, a.path()).unwrap();
    let snapshot = load_report(a.path()).unwrap().config;
    run_suite(&snapshot, b.path()).unwrap();
    assert_eq!(read(&a.path().join(EVENTS_FILE)), read(&b.path().join(EVENTS_FILE)));
}
