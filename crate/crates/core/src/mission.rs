//! End-to-end workflows: simulated drop, budget check, decode and replay.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::budgets::{
    battery_current, can_volume, endurance_minutes, total_mass, validate_rails, BudgetError,
    Endurance, RailReport, REFERENCE_TOTAL_MASS_G, REFERENCE_VOLUME_CM3, REQUIRED_ENDURANCE_MIN,
};
use crate::config::{ConfigError, MissionConfig};
use crate::descent::{step_descent, PhysicsError, VehicleState};
use crate::flight_record::{self, EnvelopeCheck};
use crate::fsm::{BuzzerPattern, FlightMode, FlightStateMachine, FsmError, Transition};
use crate::ground_station::{
    ingest, persist, summarize, GroundStationError, MissionLog, MissionMeta, MissionSummary,
};
use crate::parachute::ParachuteSpec;
use crate::sensors::{SensorError, SensorReadings, SensorSuite};
use crate::telemetry::{
    encode_frame, ChannelEvent, EmissionScheduler, EncodeError, LinkError, LinkModel,
    TelemetryFrame,
};

pub const RECEIVED_FILE: &str = "received.raw";
pub const EVENTS_FILE: &str = "events.csv";
pub const CHANNEL_FILE: &str = "channel.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const CONFIG_FILE: &str = "config.cfg";

/// Simulated time after which a drop that has not landed is abandoned, s.
pub const HARD_TIME_LIMIT: f64 = 6.0 * 3600.0;

const TIME_EPS: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum MissionError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Fsm(#[from] FsmError),
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error(transparent)]
    Encode(#[from] EncodeError),
    #[error(transparent)]
    GroundStation(#[from] GroundStationError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("vehicle still airborne after {0} s of simulated time")]
    NotLanded(f64),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> MissionError + '_ {
    move |source| MissionError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Everything produced by one simulated drop.
#[derive(Debug, Clone)]
pub struct SimulationOutcome {
    pub config: MissionConfig,
    /// Frames as they left the vehicle.
    pub sent: Vec<TelemetryFrame>,
    pub channel: Vec<ChannelEvent>,
    /// Byte stream as it reached the ground station.
    pub received: Vec<u8>,
    pub log: MissionLog,
    pub summary: MissionSummary,
    pub events: Vec<Transition>,
    /// Time the vehicle came to rest on the ground, s.
    pub touchdown: Option<f64>,
    pub end_time: f64,
    /// Frames sent while the buzzer was chirping.
    pub chirps: u64,
}

fn frame_from(
    seq: u64,
    t: f64,
    mode: FlightMode,
    r: &SensorReadings,
    temp: f64,
) -> TelemetryFrame {
    TelemetryFrame {
        seq,
        t,
        mode,
        lat: r.lat,
        lon: r.lon,
        temp,
        pressure: r.pressure,
        altitude: r.derived_altitude,
        rot_x: r.rot_x,
        rot_y: r.rot_y,
        rot_z: r.rot_z,
        acc_x: r.acc_x,
        acc_y: r.acc_y,
        acc_z: r.acc_z,
        ppm: r.ppm,
        power: r.power_mw(),
    }
}

fn names(chutes: &[ParachuteSpec]) -> Vec<String> {
    chutes.iter().map(|c| c.name.clone()).collect()
}

/// Fly the configured mission: scripted climb to the release altitude,
/// release under the primary canopy, secondary canopy when the flight
/// computer sees the deployment altitude, then descent to the ground.
///
/// Canopies whose deploy altitude is 0 or at least the release altitude
/// open at release; the rest open with the secondary stage.
pub fn simulate(config: &MissionConfig) -> Result<SimulationOutcome, MissionError> {
    config.validate()?;
    let chutes = config.parachutes()?;
    let release_altitude = config.fsm.release_altitude;
    let (at_release, at_secondary): (Vec<_>, Vec<_>) = chutes
        .into_iter()
        .partition(|c| c.deploy_altitude == 0.0 || c.deploy_altitude >= release_altitude);

    let mut fsm = FlightStateMachine::new(config.fsm)?;
    let mut suite = SensorSuite::new(config.sensors.clone(), config.sensor_seed())?;
    let mut link = LinkModel::new(config.link, config.link_seed())?;
    let mut scheduler = EmissionScheduler::new(config.cadence);

    let mut state = VehicleState::at_rest(0.0, FlightMode::Prelaunch);
    let mut active: Vec<ParachuteSpec> = Vec::new();
    let mut sent = Vec::new();
    let mut channel = Vec::new();
    let mut received = Vec::new();
    let mut touchdown = None;
    let mut chirps = 0;

    fsm.begin_ascent(0.0)?;
    let mut k: u64 = 0;
    let end_time = loop {
        let t = k as f64 * config.dt;
        if k > 0 {
            state = match fsm.mode() {
                FlightMode::Prelaunch | FlightMode::Ascent => {
                    let altitude = (config.climb_rate * t).min(release_altitude);
                    VehicleState {
                        altitude,
                        v: if altitude < release_altitude { config.climb_rate } else { 0.0 },
                        ..state
                    }
                }
                _ => step_descent(state, &config.body, &active, &config.env, config.dt)?,
            };
            state.t = t;
        }

        if fsm.mode() == FlightMode::Ascent && state.altitude >= release_altitude {
            fsm.trigger_release(t)?;
            state.v = 0.0;
            active.extend(at_release.iter().cloned());
        }

        let reading = suite.sample(&state, &config.env, fsm.stabilization_active());
        if let Some(tr) = fsm.on_altitude_sample(reading.derived_altitude, t)? {
            if tr.to == FlightMode::SecondaryDescent {
                active.extend(at_secondary.iter().cloned());
            }
        }
        state.mode = fsm.mode();
        state.active_chutes = names(&active);

        if scheduler.poll(t) {
            let seq = sent.len() as u64;
            let temp = config.temperature.temperature_at(&state);
            let frame = frame_from(seq, t, fsm.mode(), &reading, temp);
            let line = encode_frame(&frame)?;
            let distance = config.ground_offset.hypot(state.altitude);
            let tx = link.transmit(seq, &line, distance);
            if let Some(bytes) = tx.received {
                received.extend_from_slice(&bytes);
            }
            channel.push(tx.event);
            sent.push(frame);
            if fsm.buzzer_pattern(true) == BuzzerPattern::Chirp {
                chirps += 1;
            }
        }

        if touchdown.is_none() && fsm.mode() == FlightMode::Landed && state.on_ground() {
            touchdown = Some(t);
        }
        if let Some(t0) = touchdown {
            if t - t0 >= config.post_landing - TIME_EPS {
                break t;
            }
        }
        if let Some(max) = config.max_duration {
            if t >= max - TIME_EPS {
                break t;
            }
        }
        if t > HARD_TIME_LIMIT {
            return Err(MissionError::NotLanded(t));
        }
        k += 1;
    };

    let mut log = ingest(&received);
    log.meta = MissionMeta {
        mission_id: config.mission_id.clone(),
        start_time: config.start_time.clone(),
        config: config.render(),
    };
    let summary = summarize(&log);
    Ok(SimulationOutcome {
        config: config.clone(),
        sent,
        channel,
        received,
        log,
        summary,
        events: fsm.event_log().to_vec(),
        touchdown,
        end_time,
        chirps,
    })
}

#[derive(Debug, Serialize)]
struct RunReport<'a> {
    mission_id: &'a str,
    start_time: &'a str,
    seed: u64,
    end_time: f64,
    touchdown: Option<f64>,
    frames_sent: usize,
    frames_lost: usize,
    frames_corrupted: usize,
    events: &'a [Transition],
    summary: &'a MissionSummary,
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), MissionError> {
    fs::write(path, bytes).map_err(io_err(path))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

pub fn events_csv(events: &[Transition]) -> String {
    let mut out = String::from("t,from,to,trigger_altitude\n");
    for e in events {
        out.push_str(&format!(
            "{:.2},{},{},{}\n",
            e.t,
            e.from,
            e.to,
            fmt_opt(e.trigger_altitude)
        ));
    }
    out
}

pub fn channel_csv(events: &[ChannelEvent]) -> String {
    let mut out = String::from("seq,outcome,distance\n");
    for e in events {
        out.push_str(&format!("{},{},{:.2}\n", e.seq, e.outcome.as_str(), e.distance));
    }
    out
}

/// Write every artifact of a run into `dir`. Returns the paths written.
pub fn write_artifacts(outcome: &SimulationOutcome, dir: &Path) -> Result<Vec<PathBuf>, MissionError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = persist(&outcome.log, dir)?;
    let mut written = vec![files.raw, files.csv, files.jsonl, files.errors];

    let mut put = |name: &str, bytes: &[u8]| -> Result<(), MissionError> {
        let path = dir.join(name);
        write_file(&path, bytes)?;
        written.push(path);
        Ok(())
    };
    put(RECEIVED_FILE, &outcome.received)?;
    put(EVENTS_FILE, events_csv(&outcome.events).as_bytes())?;
    put(CHANNEL_FILE, channel_csv(&outcome.channel).as_bytes())?;
    put(CONFIG_FILE, outcome.config.render().as_bytes())?;

    let count = |o| outcome.channel.iter().filter(|e| e.outcome == o).count();
    let report = RunReport {
        mission_id: &outcome.config.mission_id,
        start_time: &outcome.config.start_time,
        seed: outcome.config.seed,
        end_time: outcome.end_time,
        touchdown: outcome.touchdown,
        frames_sent: outcome.sent.len(),
        frames_lost: count(crate::telemetry::ChannelOutcome::Lost),
        frames_corrupted: count(crate::telemetry::ChannelOutcome::Corrupted),
        events: &outcome.events,
        summary: &outcome.summary,
    };
    let mut json = serde_json::to_vec_pretty(&report).expect("report serialises");
    json.push(b'\n');
    put(SUMMARY_FILE, &json)?;
    Ok(written)
}

/// Load the config at `config_path`, optionally override its seed, fly it
/// and write the artifacts into `out_dir`.
pub fn cmd_simulate(
    config_path: Option<&Path>,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<SimulationOutcome, MissionError> {
    let mut config = match config_path {
        Some(p) => MissionConfig::load(p)?,
        None => MissionConfig::default(),
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    let outcome = simulate(&config)?;
    write_artifacts(&outcome, out_dir)?;
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BudgetReport {
    pub total_mass: f64,
    pub volume: f64,
    pub battery_current: f64,
    pub endurance: Endurance,
    pub rails: RailReport,
}

impl BudgetReport {
    pub fn mass_ok(&self) -> bool {
        self.total_mass == REFERENCE_TOTAL_MASS_G
    }

    pub fn volume_ok(&self) -> bool {
        (self.volume - REFERENCE_VOLUME_CM3).abs() <= 0.01
    }

    pub fn endurance_ok(&self) -> bool {
        self.endurance.at_least(REQUIRED_ENDURANCE_MIN)
    }

    pub fn passed(&self) -> bool {
        self.mass_ok() && self.volume_ok() && self.endurance_ok() && self.rails.violations.is_empty()
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for BudgetReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "mass       {:>9.1} g    target {REFERENCE_TOTAL_MASS_G} g      {}",
            self.total_mass,
            verdict(self.mass_ok())
        )?;
        writeln!(
            f,
            "volume     {:>9.2} cm3  target {REFERENCE_VOLUME_CM3} cm3  {}",
            self.volume,
            verdict(self.volume_ok())
        )?;
        writeln!(f, "current    {:>9.1} mA", self.battery_current)?;
        writeln!(
            f,
            "endurance  {:>12}   need >= {REQUIRED_ENDURANCE_MIN} min    {}",
            self.endurance.to_string(),
            verdict(self.endurance_ok())
        )?;
        for v in &self.rails.violations {
            writeln!(f, "rail       {v}  FAIL")?;
        }
        if !self.rails.skipped.is_empty() {
            writeln!(f, "unchecked  {}", self.rails.skipped.join(", "))?;
        }
        write!(f, "overall    {}", verdict(self.passed()))
    }
}

pub fn budget_report(config: &MissionConfig) -> Result<BudgetReport, MissionError> {
    let c = &config.components;
    Ok(BudgetReport {
        total_mass: total_mass(c)?,
        volume: can_volume(&config.can),
        battery_current: battery_current(&config.battery, c, config.regulator_efficiency)?,
        endurance: endurance_minutes(&config.battery, c, config.regulator_efficiency)?,
        rails: validate_rails(c),
    })
}

pub fn cmd_budget(config_path: Option<&Path>) -> Result<BudgetReport, MissionError> {
    let config = match config_path {
        Some(p) => MissionConfig::load(p)?,
        None => MissionConfig::default(),
    };
    budget_report(&config)
}

/// Decode a raw capture into `out_dir`: the ground station files plus a
/// summary.
pub fn cmd_decode(input: &Path, out_dir: &Path) -> Result<(MissionLog, MissionSummary), MissionError> {
    let bytes = fs::read(input).map_err(io_err(input))?;
    let log = ingest(&bytes);
    let summary = summarize(&log);
    persist(&log, out_dir)?;
    let mut json = serde_json::to_vec_pretty(&summary).expect("summary serialises");
    json.push(b'\n');
    write_file(&out_dir.join(SUMMARY_FILE), &json)?;
    Ok((log, summary))
}

/// Decode the bundled flight record and check it against the recorded
/// envelope.
pub fn cmd_replay() -> (MissionSummary, Vec<EnvelopeCheck>) {
    let (log, summary) = flight_record::replay();
    let checks = flight_record::check_envelope(&log, &summary);
    (summary, checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::telemetry::LinkParams;

    #[test]
    fn default_mission_lands() {
        let out = simulate(&MissionConfig::default()).unwrap();
        let modes: Vec<_> = out.events.iter().map(|e| e.to).collect();
        assert_eq!(
            modes,
            [
                FlightMode::Ascent,
                FlightMode::PrimaryDescent,
                FlightMode::SecondaryDescent,
                FlightMode::Landed
            ]
        );
        let touchdown = out.touchdown.unwrap();
        assert!((out.end_time - touchdown - 10.0).abs() < 1e-6);
        assert!(!out.log.frames.is_empty());
        assert!(out.chirps > 0);
    }

    #[test]
    fn fixed_duration_segment() {
        let cfg = MissionConfig {
            max_duration: Some(300.0),
            link: LinkParams::lossless(),
            ..MissionConfig::default()
        };
        let out = simulate(&cfg).unwrap();
        assert_eq!(out.sent.len(), 151);
        assert_eq!(out.log.frames.len(), 151);
        assert!(out.log.errors.is_empty());
    }

    #[test]
    fn events_csv_layout() {
        let out = simulate(&MissionConfig {
            max_duration: Some(200.0),
            ..MissionConfig::default()
        })
        .unwrap();
        let csv = events_csv(&out.events);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("t,from,to,trigger_altitude"));
        assert_eq!(lines.next(), Some("0.00,PRELAUNCH,ASCENT,"));
        assert!(lines.next().unwrap().starts_with("180.00,ASCENT,PRIMARY_DESCENT,"));
    }

    #[test]
    fn reference_budget_passes() {
        let report = budget_report(&MissionConfig::default()).unwrap();
        assert!(report.passed(), "{report}");
        assert!(report.to_string().ends_with("overall    PASS"));
    }
}
