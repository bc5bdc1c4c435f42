use std::fs;

use cansat_core::config::{MissionConfig, DEFAULT_CONFIG};
use cansat_core::ground_station::{
    emit_plot_data, load_csv, load_log, CSV_FILE, ERROR_FILE, RAW_FILE,
};
use cansat_core::mission::{
    cmd_budget, cmd_decode, cmd_replay, cmd_simulate, MissionError, CHANNEL_FILE, EVENTS_FILE,
    RECEIVED_FILE, SUMMARY_FILE,
};

#[test]
fn simulate_output_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_simulate(None, dir.path(), Some(3)).unwrap();

    let loaded = load_log(dir.path()).unwrap();
    assert_eq!(loaded.frames, out.log.frames);
    assert_eq!(loaded.errors, out.log.errors);
    assert_eq!(load_csv(&dir.path().join(CSV_FILE)).unwrap().len(), out.log.frames.len());

    for name in [RECEIVED_FILE, EVENTS_FILE, CHANNEL_FILE, SUMMARY_FILE, RAW_FILE, ERROR_FILE] {
        assert!(dir.path().join(name).is_file(), "{name} missing");
    }
    let summary: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(summary["seed"], 3);
    assert_eq!(summary["frames_sent"], out.sent.len());
}

#[test]
fn decoding_the_capture_reproduces_the_station_files() {
    let sim = tempfile::tempdir().unwrap();
    cmd_simulate(None, sim.path(), Some(11)).unwrap();
    let dec = tempfile::tempdir().unwrap();
    cmd_decode(&sim.path().join(RECEIVED_FILE), dec.path()).unwrap();
    for name in [CSV_FILE, RAW_FILE, ERROR_FILE] {
        assert_eq!(
            fs::read(sim.path().join(name)).unwrap(),
            fs::read(dec.path().join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn different_seeds_differ() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    cmd_simulate(None, a.path(), Some(1)).unwrap();
    cmd_simulate(None, b.path(), Some(2)).unwrap();
    assert_ne!(
        fs::read(a.path().join(CSV_FILE)).unwrap(),
        fs::read(b.path().join(CSV_FILE)).unwrap()
    );
}

#[test]
fn bad_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, format!("{DEFAULT_CONFIG}\nsim.dt = 0.2\n")).unwrap();
    let err = cmd_simulate(Some(&cfg), &dir.path().join("out"), None).unwrap_err();
    assert!(matches!(err, MissionError::Config(_)));
    assert!(err.to_string().contains("sim.dt"), "{err}");
    assert!(!dir.path().join("out").exists());
}

#[test]
fn missing_config_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = cmd_budget(Some(&dir.path().join("nope.cfg"))).unwrap_err();
    assert!(err.to_string().contains("nope.cfg"), "{err}");
}

#[test]
fn budget_flags_a_miswired_part() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    fs::write(&cfg, "component = MQ135 | 10 | 5V | 150\n").unwrap();
    let report = cmd_budget(Some(&cfg)).unwrap();
    assert_eq!(report.rails.violations.len(), 1);
    assert!(!report.passed());
}

#[test]
fn replay_passes_envelope() {
    let (summary, checks) = cmd_replay();
    assert_eq!(summary.frame_count, 14);
    assert!(checks.iter().all(|c| c.passed), "{checks:?}");
}

#[test]
fn plot_data_from_a_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = MissionConfig {
        max_duration: Some(20.0),
        ..MissionConfig::default()
    };
    let out = cansat_core::mission::simulate(&cfg).unwrap();
    let path = dir.path().join("alt.csv");
    let rows = emit_plot_data(&out.log, "altitude", &path).unwrap();
    assert_eq!(rows, 11);
    let text = fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("t,altitude\n0.00,"));
}
