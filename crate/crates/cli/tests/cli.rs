use std::fs;
use std::process::{Command, Output};

fn cansat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cansat"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn design_chute_slow_canopy() {
    let o = cansat(&["design-chute", "--mass", "0.7276", "--target-v", "3", "--cd", "1.75", "--spill-ratio", "0.2"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("canopy diameter     0.99062 m"), "{out}");
    assert!(out.contains("effective area      0.739903 m2"), "{out}");
    assert!(!out.contains("warning"));
}

#[test]
fn design_chute_warns_off_guideline() {
    let o = cansat(&["design-chute", "--mass", "0.7276", "--target-v", "11", "--spill-ratio", "0.3"]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("warning: spill_ratio"));
}

#[test]
fn design_chute_rejects_bad_mass() {
    let o = cansat(&["design-chute", "--mass", "-1", "--target-v", "3"]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: "), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("mass"), "{err}");
}

#[test]
fn budget_default_passes() {
    let o = cansat(&["budget"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.contains("727.6 g"), "{out}");
    assert!(out.contains("3804.27 cm3"), "{out}");
    assert!(out.trim_end().ends_with("overall    PASS"), "{out}");
}

#[test]
fn budget_failure_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("heavy.cfg");
    fs::write(&cfg, "component = Brick | 2000 | NONE | 0\n").unwrap();
    let o = cansat(&["budget", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
    assert_eq!(stderr(&o).trim_end(), "error: budget check failed");
}

#[test]
fn replay_passes() {
    let o = cansat(&["replay"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).matches("PASS").count(), 5);
}

#[test]
fn simulate_then_decode() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    let o = cansat(&["simulate", "--out", sim.to_str().unwrap(), "--seed", "42"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("SECONDARY_DESCENT"));

    let dec = dir.path().join("dec");
    let raw = sim.join("received.raw");
    let o = cansat(&["decode", "--in", raw.to_str().unwrap(), "--out", dec.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(
        fs::read(sim.join("frames.csv")).unwrap(),
        fs::read(dec.join("frames.csv")).unwrap()
    );
    assert!(dec.join("summary.json").is_file());
}

#[test]
fn simulate_with_config_file_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("m.cfg");
    fs::write(&cfg, "sim.max_duration = 60\nmission.seed = 5\n").unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let o = cansat(&["simulate", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert!(o.status.success(), "{}", stderr(&o));
        fs::read(out.join("frames.csv")).unwrap()
    };
    let a = run("a");
    assert_eq!(a, run("b"));
    assert_eq!(a.iter().filter(|&&b| b == b'\n').count(), 1 + 31);
}

#[test]
fn simulate_bad_config_reports_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "fsm.debounce_samples = lots\n").unwrap();
    let o = cansat(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert!(err.starts_with("error: ") && err.contains("fsm.debounce_samples"), "{err}");
}

#[test]
fn decode_missing_input() {
    let dir = tempfile::tempdir().unwrap();
    let o = cansat(&["decode", "--in", "/definitely/not/here.raw", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: /definitely/not/here.raw"));
}
