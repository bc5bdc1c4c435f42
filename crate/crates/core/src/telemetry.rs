//! Downlink telemetry: the `$NVJ` line format, the emission schedule and the
//! lossy radio link.
//!
//! A frame on the wire is one ASCII line:
//!
//! ```text
//! $NVJ,<seq>,<t>,<mode>,<lat>,<lon>,<temp>,<pressure>,<altitude>,<rot_x>,<rot_y>,<rot_z>,<acc_x>,<acc_y>,<acc_z>,<ppm>,<power>*HH\r\n
//! ```
//!
//! `HH` is the XOR of every byte between `$` and `*`, as two uppercase hex
//! digits.

use std::fmt::{self, Write as _};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fsm::FlightMode;

pub const FRAME_TAG: &str = "NVJ";
pub const FRAME_START: &[u8] = b"$NVJ";
/// Number of comma separated values after the tag.
pub const FIELD_COUNT: usize = 16;
pub const DEFAULT_CADENCE: f64 = 2.0;

/// Frame fields in wire order.
pub const FIELD_NAMES: [&str; FIELD_COUNT] = [
    "seq", "t", "mode", "lat", "lon", "temp", "pressure", "altitude", "rot_x", "rot_y", "rot_z",
    "acc_x", "acc_y", "acc_z", "ppm", "power",
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TelemetryFrame {
    pub seq: u64,
    /// Seconds since power-on.
    pub t: f64,
    pub mode: FlightMode,
    pub lat: f64,
    pub lon: f64,
    /// °C
    pub temp: f64,
    /// hPa
    pub pressure: f64,
    /// m
    pub altitude: f64,
    pub rot_x: f64,
    pub rot_y: f64,
    pub rot_z: f64,
    pub acc_x: f64,
    pub acc_y: f64,
    pub acc_z: f64,
    pub ppm: f64,
    /// mW
    pub power: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Format {
    Integer,
    Fixed(usize),
}

const fn field_format(index: usize) -> Format {
    match index {
        0 | 2 => Format::Integer,
        3 | 4 => Format::Fixed(6),
        8..=13 => Format::Fixed(4),
        _ => Format::Fixed(2),
    }
}

impl TelemetryFrame {
    pub fn zeroed(seq: u64) -> Self {
        Self {
            seq,
            t: 0.0,
            mode: FlightMode::Prelaunch,
            lat: 0.0,
            lon: 0.0,
            temp: 0.0,
            pressure: 0.0,
            altitude: 0.0,
            rot_x: 0.0,
            rot_y: 0.0,
            rot_z: 0.0,
            acc_x: 0.0,
            acc_y: 0.0,
            acc_z: 0.0,
            ppm: 0.0,
            power: 0.0,
        }
    }

    /// The floating point fields in wire order, indexed by their position in
    /// [`FIELD_NAMES`].
    fn reals(&self) -> [(usize, f64); 14] {
        [
            (1, self.t),
            (3, self.lat),
            (4, self.lon),
            (5, self.temp),
            (6, self.pressure),
            (7, self.altitude),
            (8, self.rot_x),
            (9, self.rot_y),
            (10, self.rot_z),
            (11, self.acc_x),
            (12, self.acc_y),
            (13, self.acc_z),
            (14, self.ppm),
            (15, self.power),
        ]
    }

    /// Value of a named channel, for plotting.
    pub fn channel(&self, name: &str) -> Option<f64> {
        match name {
            "seq" => Some(self.seq as f64),
            "mode" => Some(self.mode.code() as f64),
            _ => {
                let idx = FIELD_NAMES.iter().position(|f| *f == name)?;
                self.reals().iter().find(|(i, _)| *i == idx).map(|(_, v)| *v)
            }
        }
    }

    /// Every field rendered with its wire format.
    pub fn formatted_fields(&self) -> Result<Vec<String>, EncodeError> {
        let mut out = vec![String::new(); FIELD_COUNT];
        out[0] = self.seq.to_string();
        out[2] = self.mode.code().to_string();
        for (idx, value) in self.reals() {
            if !value.is_finite() {
                return Err(EncodeError::NonFinite {
                    field: FIELD_NAMES[idx],
                });
            }
            out[idx] = format_value(idx, value);
        }
        Ok(out)
    }

    /// The frame as it reads back after a trip through the wire format.
    pub fn quantized(&self) -> Result<Self, EncodeError> {
        let fields = self.formatted_fields()?;
        let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
        Ok(parse_fields(&refs).expect("formatted fields always parse"))
    }
}

fn format_value(index: usize, value: f64) -> String {
    match field_format(index) {
        Format::Integer => format!("{value}"),
        Format::Fixed(places) => format!("{value:.places$}"),
    }
}

/// Render `value` as channel `name` would appear on the wire.
pub fn format_channel(name: &str, value: f64) -> Option<String> {
    let idx = FIELD_NAMES.iter().position(|f| *f == name)?;
    Some(match field_format(idx) {
        Format::Integer => format!("{}", value as i64),
        Format::Fixed(_) => format_value(idx, value),
    })
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EncodeError {
    #[error("field {field} is not finite")]
    NonFinite { field: &'static str },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum DecodeErrorKind {
    MissingStart,
    BadChecksum,
    FieldCount,
    NonNumeric,
}

impl DecodeErrorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DecodeErrorKind::MissingStart => "MISSING_START",
            DecodeErrorKind::BadChecksum => "BAD_CHECKSUM",
            DecodeErrorKind::FieldCount => "FIELD_COUNT",
            DecodeErrorKind::NonNumeric => "NON_NUMERIC",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            DecodeErrorKind::MissingStart,
            DecodeErrorKind::BadChecksum,
            DecodeErrorKind::FieldCount,
            DecodeErrorKind::NonNumeric,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
    }
}

impl fmt::Display for DecodeErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("MISSING_START: line does not begin with $NVJ")]
    MissingStart,
    #[error("BAD_CHECKSUM: {0}")]
    BadChecksum(String),
    #[error("FIELD_COUNT: expected {FIELD_COUNT} fields, found {0}")]
    FieldCount(usize),
    #[error("NON_NUMERIC: field {field} = {value:?}")]
    NonNumeric { field: &'static str, value: String },
}

impl DecodeError {
    pub fn kind(&self) -> DecodeErrorKind {
        match self {
            DecodeError::MissingStart => DecodeErrorKind::MissingStart,
            DecodeError::BadChecksum(_) => DecodeErrorKind::BadChecksum,
            DecodeError::FieldCount(_) => DecodeErrorKind::FieldCount,
            DecodeError::NonNumeric { .. } => DecodeErrorKind::NonNumeric,
        }
    }
}

/// XOR of all bytes.
pub fn checksum(payload: &[u8]) -> u8 {
    payload.iter().fold(0, |acc, b| acc ^ b)
}

/// Checksum as it appears after the `*`.
pub fn checksum_hex(payload: &[u8]) -> String {
    format!("{:02X}", checksum(payload))
}

pub fn encode_frame(frame: &TelemetryFrame) -> Result<Vec<u8>, EncodeError> {
    let fields = frame.formatted_fields()?;
    let mut payload = String::with_capacity(160);
    payload.push_str(FRAME_TAG);
    for f in &fields {
        payload.push(',');
        payload.push_str(f);
    }
    let mut line = String::with_capacity(payload.len() + 6);
    let _ = write!(line, "${payload}*{}\r\n", checksum_hex(payload.as_bytes()));
    Ok(line.into_bytes())
}

fn hex_digit(b: u8) -> Option<u8> {
    match b {
        b'0'..=b'9' => Some(b - b'0'),
        b'A'..=b'F' => Some(b - b'A' + 10),
        _ => None,
    }
}

/// Decode one frame line. A trailing `\r\n` or `\n` is accepted.
pub fn decode_frame(line: &[u8]) -> Result<TelemetryFrame, DecodeError> {
    let line = line
        .strip_suffix(b"\r\n")
        .or_else(|| line.strip_suffix(b"\n"))
        .unwrap_or(line);
    let body = line.strip_prefix(b"$").ok_or(DecodeError::MissingStart)?;

    // The checksum covers the tag, so a damaged tag reads as a checksum
    // failure rather than a missing start.
    let star = body
        .iter()
        .rposition(|&b| b == b'*')
        .ok_or_else(|| DecodeError::BadChecksum("no '*' delimiter".into()))?;
    let (payload, sum) = (&body[..star], &body[star + 1..]);
    let expected = match sum {
        [hi, lo] => match (hex_digit(*hi), hex_digit(*lo)) {
            (Some(h), Some(l)) => h << 4 | l,
            _ => return Err(DecodeError::BadChecksum("checksum is not two uppercase hex digits".into())),
        },
        _ => {
            return Err(DecodeError::BadChecksum(format!(
                "expected 2 checksum digits, found {} bytes",
                sum.len()
            )))
        }
    };
    let actual = checksum(payload);
    if actual != expected {
        return Err(DecodeError::BadChecksum(format!(
            "computed {actual:02X}, line carries {expected:02X}"
        )));
    }

    let payload = std::str::from_utf8(payload)
        .map_err(|_| DecodeError::NonNumeric {
            field: "payload",
            value: String::from_utf8_lossy(payload).into_owned(),
        })?;
    let mut parts = payload.split(',');
    if parts.next() != Some(FRAME_TAG) {
        return Err(DecodeError::MissingStart);
    }
    let fields: Vec<&str> = parts.collect();
    if fields.len() != FIELD_COUNT {
        return Err(DecodeError::FieldCount(fields.len()));
    }
    parse_fields(&fields)
}

fn parse_fields(fields: &[&str]) -> Result<TelemetryFrame, DecodeError> {
    let bad = |idx: usize| DecodeError::NonNumeric {
        field: FIELD_NAMES[idx],
        value: fields[idx].to_string(),
    };
    let real = |idx: usize| -> Result<f64, DecodeError> {
        fields[idx]
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| bad(idx))
    };
    let seq = fields[0].parse::<u64>().map_err(|_| bad(0))?;
    let mode = fields[2]
        .parse::<u8>()
        .ok()
        .and_then(FlightMode::from_code)
        .ok_or_else(|| bad(2))?;
    Ok(TelemetryFrame {
        seq,
        t: real(1)?,
        mode,
        lat: real(3)?,
        lon: real(4)?,
        temp: real(5)?,
        pressure: real(6)?,
        altitude: real(7)?,
        rot_x: real(8)?,
        rot_y: real(9)?,
        rot_z: real(10)?,
        acc_x: real(11)?,
        acc_y: real(12)?,
        acc_z: real(13)?,
        ppm: real(14)?,
        power: real(15)?,
    })
}

/// Parse the fields of a CSV row laid out in frame order.
pub fn frame_from_fields(fields: &[&str]) -> Result<TelemetryFrame, DecodeError> {
    if fields.len() != FIELD_COUNT {
        return Err(DecodeError::FieldCount(fields.len()));
    }
    parse_fields(fields)
}

// Absorbs the rounding in `k * dt` for fixed-step clocks.
const SCHEDULE_EPSILON: f64 = 1e-9;

/// Whether a frame is due `now`, given the previous emission time.
pub fn emission_due(last_emit_t: f64, now: f64, cadence: f64) -> bool {
    now - last_emit_t >= cadence - SCHEDULE_EPSILON
}

/// Transmitter side schedule: frames go out at `t = 0, cadence, 2·cadence, …`.
#[derive(Debug, Clone)]
pub struct EmissionScheduler {
    cadence: f64,
    emitted: u64,
}

impl EmissionScheduler {
    pub fn new(cadence: f64) -> Self {
        assert!(cadence > 0.0, "cadence must be positive");
        Self { cadence, emitted: 0 }
    }

    pub fn cadence(&self) -> f64 {
        self.cadence
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Returns true when a frame should be sent at `now`. Slots are anchored
    /// at exact multiples of the cadence so the clock never drifts.
    pub fn poll(&mut self, now: f64) -> bool {
        let due = match self.emitted {
            0 => now >= -SCHEDULE_EPSILON,
            n => emission_due((n - 1) as f64 * self.cadence, now, self.cadence),
        };
        if due {
            self.emitted += 1;
        }
        due
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChannelOutcome {
    Delivered,
    Lost,
    Corrupted,
}

impl ChannelOutcome {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelOutcome::Delivered => "DELIVERED",
            ChannelOutcome::Lost => "LOST",
            ChannelOutcome::Corrupted => "CORRUPTED",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelEvent {
    pub seq: u64,
    pub outcome: ChannelOutcome,
    /// m
    pub distance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkParams {
    /// Rated radio range, m.
    pub nominal_range: f64,
    /// Below `clear_fraction · range` nothing is lost.
    pub clear_fraction: f64,
    /// Beyond `cutoff_fraction · range` everything is lost.
    pub cutoff_fraction: f64,
    /// Chance that a frame which gets through has one byte damaged.
    pub corrupt_probability: f64,
}

impl Default for LinkParams {
    fn default() -> Self {
        Self {
            nominal_range: 1200.0,
            clear_fraction: 0.8,
            cutoff_fraction: 1.5,
            corrupt_probability: 0.01,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid link model: {0}")]
pub struct LinkError(String);

impl LinkParams {
    pub fn lossless() -> Self {
        Self {
            nominal_range: f64::MAX / 4.0,
            corrupt_probability: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), LinkError> {
        if !(self.nominal_range > 0.0) {
            return Err(LinkError(format!("nominal_range must be > 0, got {}", self.nominal_range)));
        }
        if !(0.0 < self.clear_fraction && self.clear_fraction < self.cutoff_fraction) {
            return Err(LinkError(
                "expected 0 < clear_fraction < cutoff_fraction".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.corrupt_probability) {
            return Err(LinkError("corrupt_probability must be in [0, 1]".into()));
        }
        Ok(())
    }

    /// Probability that a frame sent over `distance` metres never arrives.
    pub fn loss_probability(&self, distance: f64) -> f64 {
        let clear = self.clear_fraction * self.nominal_range;
        let cutoff = self.cutoff_fraction * self.nominal_range;
        if distance <= clear {
            0.0
        } else if distance >= cutoff {
            1.0
        } else {
            (distance - clear) / (cutoff - clear)
        }
    }
}

/// Result of pushing one line through the channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub event: ChannelEvent,
    /// Bytes that reach the receiver, `None` when the frame was lost.
    pub received: Option<Vec<u8>>,
}

/// Downlink channel with a linear loss ramp around the rated range.
#[derive(Debug, Clone)]
pub struct LinkModel {
    params: LinkParams,
    rng: ChaCha8Rng,
}

impl LinkModel {
    pub fn new(params: LinkParams, seed: u64) -> Result<Self, LinkError> {
        params.validate()?;
        Ok(Self {
            params,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn params(&self) -> &LinkParams {
        &self.params
    }

    pub fn transmit(&mut self, seq: u64, line: &[u8], distance: f64) -> Transmission {
        let distance = distance.max(0.0);
        let p_loss = self.params.loss_probability(distance);
        let lost = self.rng.random::<f64>() < p_loss;
        let (outcome, received) = if lost {
            (ChannelOutcome::Lost, None)
        } else if !line.is_empty() && self.rng.random::<f64>() < self.params.corrupt_probability {
            let mut bytes = line.to_vec();
            let idx = self.rng.random_range(0..bytes.len());
            let mask = self.rng.random_range(1..=255u8);
            bytes[idx] ^= mask;
            (ChannelOutcome::Corrupted, Some(bytes))
        } else {
            (ChannelOutcome::Delivered, Some(line.to_vec()))
        };
        Transmission {
            event: ChannelEvent {
                seq,
                outcome,
                distance,
            },
            received,
        }
    }
}
