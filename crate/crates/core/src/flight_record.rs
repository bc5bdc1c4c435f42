//! Recorded telemetry from the field drop, bundled as a raw frame fixture for
//! replay through the ground-station pipeline.

use crate::descent::{altitude_to_pressure, SEA_LEVEL_PRESSURE_HPA};
use crate::fsm::FlightMode;
use crate::ground_station::{ingest, summarize, MissionLog, MissionSummary};
use crate::telemetry::{encode_frame, TelemetryFrame};

/// Raw frame lines for the 14 recorded rows.
pub const FIXTURE: &[u8] = include_bytes!("../fixtures/flight_record.raw");

pub const FRAME_SPACING_S: f64 = 2.0;

/// (lat, lon, temp °C, altitude m, x, y, ppm)
pub const ROWS: [(f64, f64, f64, f64, f64, f64, f64); 14] = [
    (23.11, 72.49, 41.3, 150.44, -0.02, -0.02, 44.0),
    (23.11, 72.49, 41.4, 158.36, -0.02, -0.02, 59.54),
    (23.11, 72.49, 41.4, 250.11, -0.02, -0.02, 55.8),
    (23.11, 72.49, 41.4, 269.86, -0.02, -0.02, 40.98),
    (23.11, 72.49, 41.5, 353.69, -0.02, -0.02, 48.82),
    (23.11, 72.49, 41.5, 359.61, -0.02, -0.02, 55.8),
    (23.11, 72.49, 41.5, 457.94, -0.02, -0.02, 40.98),
    (23.11, 72.49, 41.5, 469.03, -0.02, -0.02, 47.17),
    (23.11, 72.49, 41.6, 528.28, -0.02, -0.02, 55.8),
    (23.11, 72.49, 41.6, 569.78, -0.03, -0.02, 47.17),
    (23.11, 72.49, 41.6, 678.90, -0.01, -0.03, 52.22),
    (23.11, 72.49, 41.7, 690.17, -0.06, -0.02, 53.99),
    (23.11, 72.49, 41.7, 720.94, -0.04, -0.05, 55.8),
    (23.11, 72.49, 41.7, 770.38, -0.03, -0.01, 47.17),
];

/// The recorded rows as frames: seq is the row index, frames are two seconds
/// apart, pressure follows from the barometric altitude and channels the
/// recording did not keep are zero.
pub fn frames() -> Vec<TelemetryFrame> {
    ROWS.iter()
        .enumerate()
        .map(|(i, &(lat, lon, temp, altitude, x, y, ppm))| TelemetryFrame {
            seq: i as u64,
            t: FRAME_SPACING_S * i as f64,
            mode: FlightMode::Ascent,
            lat,
            lon,
            temp,
            pressure: altitude_to_pressure(altitude, SEA_LEVEL_PRESSURE_HPA),
            altitude,
            rot_x: x,
            rot_y: y,
            ppm,
            ..TelemetryFrame::zeroed(i as u64)
        })
        .collect()
}

/// Encode [`frames`] into the fixture byte layout.
pub fn render_fixture() -> Vec<u8> {
    frames()
        .iter()
        .flat_map(|f| encode_frame(f).expect("recorded values are finite"))
        .collect()
}

pub fn replay() -> (MissionLog, MissionSummary) {
    let log = ingest(FIXTURE);
    let summary = summarize(&log);
    (log, summary)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Compare a replayed log against the recorded envelope.
pub fn check_envelope(log: &MissionLog, summary: &MissionSummary) -> Vec<EnvelopeCheck> {
    let mut checks = Vec::new();
    let mut add = |name, passed, detail: String| checks.push(EnvelopeCheck { name, passed, detail });

    add(
        "frame count",
        log.frames.len() == ROWS.len() && log.errors.is_empty(),
        format!("{} frames, {} errors", log.frames.len(), log.errors.len()),
    );
    add(
        "ppm range",
        summary.ppm_min == Some(40.98) && summary.ppm_max == Some(59.54),
        format!("min {:?}, max {:?}", summary.ppm_min, summary.ppm_max),
    );
    add(
        "position",
        !log.frames.is_empty() && log.frames.iter().all(|f| f.lat == 23.11 && f.lon == 72.49),
        "lat 23.11, lon 72.49 on every frame".to_string(),
    );
    add(
        "max altitude",
        summary.max_altitude == Some(770.38),
        format!("{:?}", summary.max_altitude),
    );
    add(
        "temperature band",
        !log.frames.is_empty() && log.frames.iter().all(|f| (41.3..=41.7).contains(&f.temp)),
        format!("min {:?}, max {:?}", summary.temp_min, summary.temp_max),
    );
    checks
}
