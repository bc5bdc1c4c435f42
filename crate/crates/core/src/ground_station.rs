//! Receiving end of the downlink: stream resynchronisation, decoding, mission
//! logs, summary statistics and file persistence.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::telemetry::{
    decode_frame, encode_frame, format_channel, frame_from_fields, DecodeErrorKind,
    TelemetryFrame, FIELD_NAMES, FRAME_START,
};

pub const RAW_FILE: &str = "frames.raw";
pub const CSV_FILE: &str = "frames.csv";
pub const JSONL_FILE: &str = "frames.jsonl";
pub const ERROR_FILE: &str = "errors.log";

/// Altitude bands used for descent-rate estimates, (upper, lower) in m.
pub const DESCENT_BANDS: [(f64, f64); 2] = [(900.0, 500.0), (500.0, 0.0)];

#[derive(Debug, Error)]
pub enum GroundStationError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("unknown channel {channel:?}; valid channels: {}", valid.join(", "))]
    UnknownChannel {
        channel: String,
        valid: Vec<&'static str>,
    },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> GroundStationError + '_ {
    move |source| GroundStationError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> GroundStationError + '_ {
    move |e| GroundStationError::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionMeta {
    pub mission_id: String,
    pub start_time: String,
    /// Text of the configuration the mission ran with.
    pub config: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestError {
    /// Byte offset into the received stream.
    pub offset: usize,
    pub kind: DecodeErrorKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MissionLog {
    pub meta: MissionMeta,
    pub frames: Vec<TelemetryFrame>,
    pub errors: Vec<IngestError>,
    /// Indices into `frames` whose seq did not exceed every earlier seq.
    pub out_of_order: Vec<usize>,
    #[serde(skip)]
    max_seq: Option<u64>,
}

impl MissionLog {
    pub fn with_meta(meta: MissionMeta) -> Self {
        Self {
            meta,
            ..Self::default()
        }
    }

    pub fn push_frame(&mut self, frame: TelemetryFrame) {
        match self.max_seq {
            Some(m) if frame.seq <= m => self.out_of_order.push(self.frames.len()),
            _ => self.max_seq = Some(frame.seq),
        }
        self.frames.push(frame);
    }
}

fn is_line_noise(bytes: &[u8]) -> bool {
    bytes.iter().all(|b| matches!(b, b'\r' | b'\n'))
}

fn find(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    haystack
        .get(from..)?
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}

/// Decode every frame in a received byte stream.
///
/// The scanner hunts for `$NVJ`, takes bytes up to the next newline (or the
/// next `$`, whichever comes first) and decodes them. Bytes skipped while
/// hunting are reported as `MISSING_START`; blank lines are not. Nothing in
/// the input can make this fail.
pub fn ingest(stream: &[u8]) -> MissionLog {
    let mut log = MissionLog::default();
    ingest_into(&mut log, stream);
    log
}

pub fn ingest_into(log: &mut MissionLog, stream: &[u8]) {
    let mut pos = 0;
    while pos < stream.len() {
        let Some(start) = find(stream, FRAME_START, pos) else {
            if !is_line_noise(&stream[pos..]) {
                log.errors.push(IngestError {
                    offset: pos,
                    kind: DecodeErrorKind::MissingStart,
                });
            }
            break;
        };
        if !is_line_noise(&stream[pos..start]) {
            log.errors.push(IngestError {
                offset: pos,
                kind: DecodeErrorKind::MissingStart,
            });
        }

        let tail = &stream[start + 1..];
        let newline = tail.iter().position(|&b| b == b'\n').map(|i| i + 1);
        let next_start = tail.iter().position(|&b| b == b'$');
        let len = match (newline, next_start) {
            (Some(nl), Some(s)) if s < nl => s,
            (Some(nl), _) => nl,
            (None, Some(s)) => s,
            (None, None) => tail.len(),
        };
        let end = start + 1 + len;

        match decode_frame(&stream[start..end]) {
            Ok(frame) => log.push_frame(frame),
            Err(e) => log.errors.push(IngestError {
                offset: start,
                kind: e.kind(),
            }),
        }
        pos = end;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandRate {
    pub upper: f64,
    pub lower: f64,
    /// Descent speed, m/s, positive downwards.
    pub rate: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub frame_count: usize,
    pub error_count: usize,
    pub loss_rate: f64,
    pub min_altitude: Option<f64>,
    pub max_altitude: Option<f64>,
    pub descent_rates: Vec<BandRate>,
    pub ppm_min: Option<f64>,
    pub ppm_max: Option<f64>,
    pub ppm_mean: Option<f64>,
    pub temp_min: Option<f64>,
    pub temp_max: Option<f64>,
    /// Time between the first and last received frame, s.
    pub duration: f64,
}

impl MissionSummary {
    pub fn band(&self, upper: f64, lower: f64) -> Option<&BandRate> {
        self.descent_rates
            .iter()
            .find(|b| b.upper == upper && b.lower == lower)
    }
}

/// Least-squares slope of `ys` against `xs`.
fn ls_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(x, y) in points {
        sxy += (x - mean_x) * (y - mean_y);
        sxx += (x - mean_x) * (x - mean_x);
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

fn min_max_mean(values: impl Iterator<Item = f64>) -> (Option<f64>, Option<f64>, Option<f64>) {
    let (mut min, mut max, mut sum, mut n) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for v in values {
        min = min.min(v);
        max = max.max(v);
        sum += v;
        n += 1;
    }
    if n == 0 {
        (None, None, None)
    } else {
        (Some(min), Some(max), Some(sum / n as f64))
    }
}

pub fn summarize(log: &MissionLog) -> MissionSummary {
    let frames = &log.frames;

    let mut seqs: Vec<u64> = frames.iter().map(|f| f.seq).collect();
    seqs.sort_unstable();
    seqs.dedup();
    let loss_rate = match (seqs.first(), seqs.last()) {
        (Some(&lo), Some(&hi)) => {
            let expected = (hi - lo + 1) as f64;
            (1.0 - seqs.len() as f64 / expected).clamp(0.0, 1.0)
        }
        _ => 0.0,
    };

    let (min_altitude, max_altitude, _) = min_max_mean(frames.iter().map(|f| f.altitude));
    let (ppm_min, ppm_max, ppm_mean) = min_max_mean(frames.iter().map(|f| f.ppm));
    let (temp_min, temp_max, _) = min_max_mean(frames.iter().map(|f| f.temp));

    let mut descent_rates = Vec::new();
    if frames.len() >= 2 {
        for (upper, lower) in DESCENT_BANDS {
            let points: Vec<(f64, f64)> = frames
                .iter()
                .filter(|f| f.mode.is_descending() && f.altitude <= upper && f.altitude >= lower)
                .map(|f| (f.t, f.altitude))
                .collect();
            if let Some(slope) = ls_slope(&points) {
                descent_rates.push(BandRate {
                    upper,
                    lower,
                    rate: -slope,
                    samples: points.len(),
                });
            }
        }
    }

    let duration = match (
        frames.iter().map(|f| f.t).reduce(f64::min),
        frames.iter().map(|f| f.t).reduce(f64::max),
    ) {
        (Some(a), Some(b)) => b - a,
        _ => 0.0,
    };

    MissionSummary {
        frame_count: frames.len(),
        error_count: log.errors.len(),
        loss_rate,
        min_altitude,
        max_altitude,
        descent_rates,
        ppm_min,
        ppm_max,
        ppm_mean,
        temp_min,
        temp_max,
        duration,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PersistedFiles {
    pub raw: PathBuf,
    pub csv: PathBuf,
    pub jsonl: PathBuf,
    pub errors: PathBuf,
}

fn create(path: &Path) -> Result<BufWriter<File>, GroundStationError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// Write the raw frame lines, the CSV table, the JSONL dump and the error log
/// into `dir`, creating it if needed.
pub fn persist(log: &MissionLog, dir: &Path) -> Result<PersistedFiles, GroundStationError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let files = PersistedFiles {
        raw: dir.join(RAW_FILE),
        csv: dir.join(CSV_FILE),
        jsonl: dir.join(JSONL_FILE),
        errors: dir.join(ERROR_FILE),
    };

    let mut raw = create(&files.raw)?;
    for frame in &log.frames {
        let line = encode_frame(frame).map_err(|e| GroundStationError::Format {
            path: files.raw.clone(),
            message: e.to_string(),
        })?;
        raw.write_all(&line).map_err(io_err(&files.raw))?;
    }
    raw.flush().map_err(io_err(&files.raw))?;

    write_csv(&log.frames, &files.csv)?;

    let mut jsonl = create(&files.jsonl)?;
    for frame in &log.frames {
        let quantized = frame.quantized().map_err(|e| GroundStationError::Format {
            path: files.jsonl.clone(),
            message: e.to_string(),
        })?;
        let line = serde_json::to_string(&quantized).expect("frames serialise");
        writeln!(jsonl, "{line}").map_err(io_err(&files.jsonl))?;
    }
    jsonl.flush().map_err(io_err(&files.jsonl))?;

    let mut errors = create(&files.errors)?;
    for e in &log.errors {
        writeln!(errors, "{}\t{}", e.offset, e.kind).map_err(io_err(&files.errors))?;
    }
    errors.flush().map_err(io_err(&files.errors))?;

    Ok(files)
}

/// One header row plus one row per frame, columns in wire order.
pub fn write_csv(frames: &[TelemetryFrame], path: &Path) -> Result<(), GroundStationError> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(FIELD_NAMES).map_err(csv_err(path))?;
    for frame in frames {
        let fields = frame.formatted_fields().map_err(|e| GroundStationError::Format {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        w.write_record(&fields).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn load_csv(path: &Path) -> Result<Vec<TelemetryFrame>, GroundStationError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut reader = csv::Reader::from_reader(file);
    let header = reader.headers().map_err(csv_err(path))?.clone();
    if header.iter().ne(FIELD_NAMES) {
        return Err(GroundStationError::Format {
            path: path.to_path_buf(),
            message: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    let mut frames = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err(path))?;
        let fields: Vec<&str> = record.iter().collect();
        let frame = frame_from_fields(&fields).map_err(|e| GroundStationError::Format {
            path: path.to_path_buf(),
            message: format!("row {}: {e}", row + 1),
        })?;
        frames.push(frame);
    }
    Ok(frames)
}

pub fn load_errors(path: &Path) -> Result<Vec<IngestError>, GroundStationError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    text.lines()
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, line)| {
            let parsed = line.split_once('\t').and_then(|(off, kind)| {
                Some(IngestError {
                    offset: off.parse().ok()?,
                    kind: DecodeErrorKind::parse(kind)?,
                })
            });
            parsed.ok_or_else(|| GroundStationError::Format {
                path: path.to_path_buf(),
                message: format!("line {}: expected <offset>\\t<category>", i + 1),
            })
        })
        .collect()
}

/// Rebuild a log from the files [`persist`] wrote. Metadata is not stored
/// there and comes back empty.
pub fn load_log(dir: &Path) -> Result<MissionLog, GroundStationError> {
    let mut log = MissionLog::default();
    for frame in load_csv(&dir.join(CSV_FILE))? {
        log.push_frame(frame);
    }
    log.errors = load_errors(&dir.join(ERROR_FILE))?;
    Ok(log)
}

/// Two-column `t,<channel>` CSV for plotting.
pub fn emit_plot_data(
    log: &MissionLog,
    channel: &str,
    path: &Path,
) -> Result<usize, GroundStationError> {
    if !FIELD_NAMES.contains(&channel) || channel == "t" {
        return Err(GroundStationError::UnknownChannel {
            channel: channel.to_string(),
            valid: FIELD_NAMES.iter().copied().filter(|c| *c != "t").collect(),
        });
    }
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["t", channel]).map_err(csv_err(path))?;
    for frame in &log.frames {
        let t = format_channel("t", frame.t).expect("t is a frame field");
        let value = frame.channel(channel).expect("channel validated above");
        let v = format_channel(channel, value).expect("channel validated above");
        w.write_record([t, v]).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(log.frames.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fsm::FlightMode;

    fn frame(seq: u64, t: f64, altitude: f64, mode: FlightMode) -> TelemetryFrame {
        TelemetryFrame {
            t,
            altitude,
            mode,
            ppm: 40.0 + seq as f64,
            ..TelemetryFrame::zeroed(seq)
        }
    }

    fn stream(frames: &[TelemetryFrame]) -> Vec<u8> {
        frames.iter().flat_map(|f| encode_frame(f).unwrap()).collect()
    }

    #[test]
    fn clean_stream() {
        let frames: Vec<_> = (0..10)
            .map(|i| frame(i, 2.0 * i as f64, 900.0 - 20.0 * i as f64, FlightMode::PrimaryDescent))
            .collect();
        let log = ingest(&stream(&frames));
        assert_eq!(log.frames, frames);
        assert!(log.errors.is_empty());
        assert!(log.out_of_order.is_empty());
    }

    #[test]
    fn resyncs_after_garbage() {
        let a = frame(0, 0.0, 100.0, FlightMode::Ascent);
        let b = frame(1, 2.0, 110.0, FlightMode::Ascent);
        let mut bytes = encode_frame(&a).unwrap();
        bytes.extend((0..50u8).map(|i| i.wrapping_mul(37).wrapping_add(11)));
        bytes.extend(encode_frame(&b).unwrap());
        let log = ingest(&bytes);
        assert_eq!(log.frames, vec![a, b]);
        assert!(!log.errors.is_empty());
        assert!(log.errors.iter().all(|e| e.offset >= 80));
    }

    #[test]
    fn truncated_frame_does_not_swallow_next() {
        let a = encode_frame(&frame(0, 0.0, 1.0, FlightMode::Ascent)).unwrap();
        let b = frame(1, 2.0, 2.0, FlightMode::Ascent);
        let mut bytes = a[..30].to_vec();
        bytes.extend(encode_frame(&b).unwrap());
        let log = ingest(&bytes);
        assert_eq!(log.frames, vec![b]);
        assert_eq!(log.errors.len(), 1);
        assert_eq!(log.errors[0].kind, DecodeErrorKind::BadChecksum);
    }

    #[test]
    fn empty_and_blank_streams() {
        assert_eq!(ingest(b""), MissionLog::default());
        assert_eq!(ingest(b"\r\n\n"), MissionLog::default());
        assert_eq!(ingest(b"hello").errors.len(), 1);
    }

    #[test]
    fn reordered_frames_flagged() {
        let frames = [
            frame(0, 0.0, 0.0, FlightMode::Ascent),
            frame(2, 4.0, 0.0, FlightMode::Ascent),
            frame(1, 2.0, 0.0, FlightMode::Ascent),
        ];
        let log = ingest(&stream(&frames));
        assert_eq!(log.frames.len(), 3);
        assert_eq!(log.out_of_order, vec![2]);
        assert_eq!(summarize(&log).loss_rate, 0.0);
    }

    #[test]
    fn loss_rate_from_seq_gaps() {
        let mut log = MissionLog::default();
        for seq in [0, 1, 3] {
            log.push_frame(frame(seq, seq as f64 * 2.0, 10.0, FlightMode::Ascent));
        }
        assert_eq!(summarize(&log).loss_rate, 0.25);
    }

    #[test]
    fn constructed_descent_rate() {
        let mut log = MissionLog::default();
        for i in 0..100u64 {
            let t = 2.0 * i as f64;
            log.push_frame(frame(i, t, 480.0 - 3.0 * t, FlightMode::SecondaryDescent));
        }
        let summary = summarize(&log);
        let band = summary.band(500.0, 0.0).unwrap();
        assert!((band.rate - 3.0).abs() < 0.01, "{band:?}");
        assert!(summary.band(900.0, 500.0).is_none());
    }

    #[test]
    fn too_few_frames_for_rates() {
        let mut log = MissionLog::default();
        log.push_frame(frame(0, 0.0, 400.0, FlightMode::SecondaryDescent));
        let s = summarize(&log);
        assert!(s.descent_rates.is_empty());
        assert_eq!(s.frame_count, 1);
        assert_eq!(s.duration, 0.0);
    }

    #[test]
    fn persist_and_reload() {
        let dir = tempfile::tempdir().unwrap();
        let mut log = MissionLog::default();
        for i in 0..10 {
            log.push_frame(frame(i, 2.0 * i as f64, 100.0 + i as f64, FlightMode::Ascent));
        }
        log.errors.push(IngestError {
            offset: 12,
            kind: DecodeErrorKind::BadChecksum,
        });
        let files = persist(&log, dir.path()).unwrap();
        let csv = fs::read_to_string(&files.csv).unwrap();
        assert_eq!(csv.lines().count(), 11);
        assert!(csv.starts_with("seq,t,mode,lat,lon,temp,pressure,altitude,"));
        assert_eq!(fs::read_to_string(&files.errors).unwrap(), "12\tBAD_CHECKSUM\n");
        assert_eq!(fs::read_to_string(&files.jsonl).unwrap().lines().count(), 10);
        assert_eq!(ingest(&fs::read(&files.raw).unwrap()).frames, log.frames);

        let back = load_log(dir.path()).unwrap();
        assert_eq!(back.frames, log.frames);
        assert_eq!(back.errors, log.errors);
    }

    #[test]
    fn persist_reports_bad_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, b"x").unwrap();
        let err = persist(&MissionLog::default(), &blocker.join("sub")).unwrap_err();
        assert!(err.to_string().contains("file"), "{err}");
    }

    #[test]
    fn plot_series() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ppm.csv");
        assert_eq!(emit_plot_data(&MissionLog::default(), "ppm", &path).unwrap(), 0);
        assert_eq!(fs::read_to_string(&path).unwrap(), "t,ppm\n");

        let mut log = MissionLog::default();
        log.push_frame(frame(0, 0.0, 150.44, FlightMode::Ascent));
        log.push_frame(frame(1, 2.0, 158.36, FlightMode::Ascent));
        emit_plot_data(&log, "altitude", &path).unwrap();
        assert_eq!(
            fs::read_to_string(&path).unwrap(),
            "t,altitude\n0.00,150.44\n2.00,158.36\n"
        );

        let err = emit_plot_data(&log, "nonexistent", &path).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("nonexistent") && msg.contains("altitude") && msg.contains("ppm"));
    }
}
