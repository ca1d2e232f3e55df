//! Session data model and ingestion: manifests, interview transcripts and
//! time-stamped frame-feature streams (COVAREP, formants, facial action units).

use std::collections::HashSet;
use std::fmt;
use std::io;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec;
use crate::topic::normalize_sentence;

/// Frame hop of the headerless COVAREP and formant streams.
pub const FRAME_HOP: f64 = 0.010;

/// Highest PHQ-8 score.
pub const PHQ8_MAX: u8 = 24;

pub const COVAREP_CHANNELS: [&str; 74] = [
    "F0", "VUV", "NAQ", "QOQ", "H1H2", "PSP", "MDQ", "peakSlope", "Rd", "Rd_conf", "creak",
    "MCEP_0", "MCEP_1", "MCEP_2", "MCEP_3", "MCEP_4", "MCEP_5", "MCEP_6", "MCEP_7", "MCEP_8",
    "MCEP_9", "MCEP_10", "MCEP_11", "MCEP_12", "MCEP_13", "MCEP_14", "MCEP_15", "MCEP_16",
    "MCEP_17", "MCEP_18", "MCEP_19", "MCEP_20", "MCEP_21", "MCEP_22", "MCEP_23", "MCEP_24",
    "HMPDM_0", "HMPDM_1", "HMPDM_2", "HMPDM_3", "HMPDM_4", "HMPDM_5", "HMPDM_6", "HMPDM_7",
    "HMPDM_8", "HMPDM_9", "HMPDM_10", "HMPDM_11", "HMPDM_12", "HMPDM_13", "HMPDM_14",
    "HMPDM_15", "HMPDM_16", "HMPDM_17", "HMPDM_18", "HMPDM_19", "HMPDM_20", "HMPDM_21",
    "HMPDM_22", "HMPDM_23", "HMPDM_24", "HMPDD_0", "HMPDD_1", "HMPDD_2", "HMPDD_3", "HMPDD_4",
    "HMPDD_5", "HMPDD_6", "HMPDD_7", "HMPDD_8", "HMPDD_9", "HMPDD_10", "HMPDD_11", "HMPDD_12",
];

pub const FORMANT_CHANNELS: [&str; 5] = ["F1", "F2", "F3", "F4", "F5"];

/// The 20 action-unit columns of the facial-feature files, selected by header name.
pub const AU_CHANNELS: [&str; 20] = [
    "AU01_r", "AU02_r", "AU04_r", "AU05_r", "AU06_r", "AU09_r", "AU10_r", "AU12_r", "AU14_r",
    "AU15_r", "AU17_r", "AU20_r", "AU25_r", "AU26_r", "AU04_c", "AU12_c", "AU15_c", "AU23_c",
    "AU28_c", "AU45_c",
];

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("bad timestamp in row {row}")]
    BadTimestamp { row: usize },
    #[error("unknown speaker `{label}` in row {row}")]
    UnknownSpeaker { row: usize, label: String },
    #[error("row {row} has {found} columns, expected {expected}")]
    ColumnCountMismatch { row: usize, expected: usize, found: usize },
    #[error("timestamps not strictly increasing at row {row}")]
    NonMonotonicTimestamps { row: usize },
    #[error("non-numeric cell `{cell}` at row {row}, column {col}")]
    NonNumericCell { row: usize, col: usize, cell: String },
    #[error("invalid window [{t0}, {t1})")]
    InvalidWindow { t0: f64, t1: f64 },
    #[error("malformed delimited text: {0}")]
    Malformed(String),
    #[error("file not found: {}", path.display())]
    FileNotFound { session_id: Option<String>, path: PathBuf },
    #[error("cannot read {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("session `{session_id}`: {reason}")]
    InvalidSession { session_id: String, reason: String },
    #[error("session `{session_id}`: {source}")]
    Session { session_id: String, source: Box<CorpusError> },
}

impl CorpusError {
    fn in_session(self, session_id: &str) -> Self {
        match self {
            CorpusError::FileNotFound { path, .. } => {
                CorpusError::FileNotFound { session_id: Some(session_id.to_string()), path }
            }
            other => CorpusError::Session { session_id: session_id.to_string(), source: Box::new(other) },
        }
    }

    /// Session id the error is attributed to, if any.
    pub fn session_id(&self) -> Option<&str> {
        match self {
            CorpusError::FileNotFound { session_id, .. } => session_id.as_deref(),
            CorpusError::Session { session_id, .. } | CorpusError::InvalidSession { session_id, .. } => {
                Some(session_id)
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: String,
    /// Binary gender code, 0 or 1.
    pub gender: u8,
    pub phq8: u8,
    pub split: Split,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Speaker {
    Interviewer,
    Participant,
}

impl Speaker {
    fn parse(label: &str) -> Option<Self> {
        match label.trim().to_lowercase().as_str() {
            "ellie" | "interviewer" => Some(Speaker::Interviewer),
            "participant" => Some(Speaker::Participant),
            _ => None,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Speaker::Interviewer => "Ellie",
            Speaker::Participant => "Participant",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    pub start: f64,
    pub stop: f64,
    pub speaker: Speaker,
    pub text: String,
}

fn detect_delimiter(header: &str) -> u8 {
    if header.contains('\t') {
        b'\t'
    } else {
        b','
    }
}

/// Parses a transcript with a `start_time, stop_time, speaker, value` header.
///
/// The delimiter is tab when the header line contains one, comma otherwise.
/// Utterances whose text normalizes to nothing are dropped.
pub fn parse_transcript(raw: &str) -> Result<Vec<Utterance>, CorpusError> {
    let header_line = raw.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let delimiter = detect_delimiter(header_line);
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter)
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::Headers)
        .from_reader(raw.as_bytes());

    let headers = reader.headers().map_err(|e| CorpusError::Malformed(e.to_string()))?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
    };
    let start_col = find("start_time")?;
    let stop_col = find("stop_time")?;
    let speaker_col = find("speaker")?;
    let value_col = find("value")?;
    let value_is_last = value_col + 1 == headers.len();
    let joiner = if delimiter == b'\t' { "\t" } else { "," };

    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| CorpusError::Malformed(e.to_string()))?;
        if record.iter().all(|f| f.trim().is_empty()) {
            continue;
        }
        let field = |c: usize| record.get(c).unwrap_or("").trim();
        let time = |c: usize| -> Result<f64, CorpusError> {
            field(c)
                .parse::<f64>()
                .ok()
                .filter(|t| t.is_finite())
                .ok_or(CorpusError::BadTimestamp { row })
        };
        let start = time(start_col)?;
        let stop = time(stop_col)?;
        if stop < start {
            return Err(CorpusError::BadTimestamp { row });
        }
        let label = field(speaker_col);
        let speaker =
            Speaker::parse(label).ok_or_else(|| CorpusError::UnknownSpeaker { row, label: label.to_string() })?;
        // An unquoted delimiter inside the text spills into extra fields.
        let text = if value_is_last && record.len() > headers.len() {
            record.iter().skip(value_col).collect::<Vec<_>>().join(joiner).trim().to_string()
        } else {
            field(value_col).to_string()
        };
        if normalize_sentence(&text).is_empty() {
            continue;
        }
        out.push(Utterance { start, stop, speaker, text });
    }
    Ok(out)
}

/// Serializes utterances as a tab-separated transcript readable by [`parse_transcript`].
pub fn write_transcript(utterances: &[Utterance]) -> String {
    let mut writer = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    let io_err = "writing to memory cannot fail";
    writer.write_record(["start_time", "stop_time", "speaker", "value"]).expect(io_err);
    for u in utterances {
        writer
            .write_record([u.start.to_string(), u.stop.to_string(), u.speaker.label().to_string(), u.text.clone()])
            .expect(io_err);
    }
    String::from_utf8(writer.into_inner().expect(io_err)).expect("utf-8 input yields utf-8 output")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StreamKind {
    Covarep,
    Formant,
    Au,
}

impl StreamKind {
    pub fn channel_names(self) -> &'static [&'static str] {
        match self {
            StreamKind::Covarep => &COVAREP_CHANNELS,
            StreamKind::Formant => &FORMANT_CHANNELS,
            StreamKind::Au => &AU_CHANNELS,
        }
    }

    pub fn channel_count(self) -> usize {
        self.channel_names().len()
    }
}

/// Half-open time window `[start, end)` in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
}

impl Window {
    pub fn new(start: f64, end: f64) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, t: f64) -> bool {
        self.start <= t && t < self.end
    }
}

/// Frame-level feature stream: one row of channel values per timestamp.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeries {
    timestamps: Vec<f64>,
    values: Vec<f64>,
    channel_names: Vec<String>,
}

impl FrameSeries {
    pub fn new(timestamps: Vec<f64>, values: Vec<f64>, channel_names: Vec<String>) -> Result<Self, CorpusError> {
        let width = channel_names.len();
        if values.len() != timestamps.len() * width {
            return Err(CorpusError::ColumnCountMismatch {
                row: 0,
                expected: timestamps.len() * width,
                found: values.len(),
            });
        }
        if let Some(i) = timestamps.windows(2).position(|w| !(w[0] < w[1])) {
            return Err(CorpusError::NonMonotonicTimestamps { row: i + 2 });
        }
        Ok(Self { timestamps, values, channel_names })
    }

    pub fn empty(kind: StreamKind) -> Self {
        Self {
            timestamps: Vec::new(),
            values: Vec::new(),
            channel_names: kind.channel_names().iter().map(|s| s.to_string()).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn channel_count(&self) -> usize {
        self.channel_names.len()
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.channel_count();
        &self.values[i * w..(i + 1) * w]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn index_range(&self, t0: f64, t1: f64) -> std::ops::Range<usize> {
        let lo = self.timestamps.partition_point(|&t| t < t0);
        let hi = self.timestamps.partition_point(|&t| t < t1).max(lo);
        lo..hi
    }

    /// Concatenates the frames of several windows, in the given order.
    pub fn gather(&self, windows: &[Window]) -> FrameSeries {
        let w = self.channel_count();
        let mut timestamps = Vec::new();
        let mut values = Vec::new();
        for win in windows {
            let r = self.index_range(win.start, win.end);
            timestamps.extend_from_slice(&self.timestamps[r.clone()]);
            values.extend_from_slice(&self.values[r.start * w..r.end * w]);
        }
        FrameSeries { timestamps, values, channel_names: self.channel_names.clone() }
    }
}

/// Frames with `t0 <= timestamp < t1`.
pub fn slice_frames(series: &FrameSeries, t0: f64, t1: f64) -> Result<FrameSeries, CorpusError> {
    if !(t0 <= t1) {
        return Err(CorpusError::InvalidWindow { t0, t1 });
    }
    Ok(series.gather(&[Window::new(t0, t1)]))
}

fn split_cells(line: &str, delimiter: Option<char>) -> Vec<&str> {
    match delimiter {
        Some(d) => line.split(d).map(str::trim).collect(),
        None => line.split_whitespace().collect(),
    }
}

fn numeric_delimiter(line: &str) -> Option<char> {
    if line.contains('\t') {
        Some('\t')
    } else if line.contains(',') {
        Some(',')
    } else {
        None
    }
}

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64, CorpusError> {
    cell.parse::<f64>()
        .map_err(|_| CorpusError::NonNumericCell { row, col, cell: cell.to_string() })
}

/// Parses a frame-feature stream.
///
/// COVAREP and formant files are headerless: rows carry exactly the stream's
/// channels (timestamps synthesized at [`FRAME_HOP`]) or one extra leading
/// timestamp column. AU files carry a header with a `timestamp` column and the
/// [`AU_CHANNELS`] columns, located by name. Non-finite cells are kept.
pub fn load_frame_series(raw: &str, kind: StreamKind) -> Result<FrameSeries, CorpusError> {
    let mut lines = raw.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let names: Vec<String> = kind.channel_names().iter().map(|s| s.to_string()).collect();
    let width = names.len();
    let mut timestamps = Vec::new();
    let mut values = Vec::new();

    match kind {
        StreamKind::Covarep | StreamKind::Formant => {
            let mut explicit_time: Option<bool> = None;
            for (i, line) in lines {
                let row = i + 1;
                let cells = split_cells(line, numeric_delimiter(line));
                let explicit = match (explicit_time, cells.len()) {
                    (None, n) if n == width => false,
                    (None, n) if n == width + 1 => true,
                    (Some(e), n) if n == width + usize::from(e) => e,
                    (e, n) => {
                        return Err(CorpusError::ColumnCountMismatch {
                            row,
                            expected: width + usize::from(e.unwrap_or(false)),
                            found: n,
                        })
                    }
                };
                explicit_time = Some(explicit);
                let offset = usize::from(explicit);
                let t = if explicit {
                    parse_cell(cells[0], row, 1)?
                } else {
                    timestamps.len() as f64 * FRAME_HOP
                };
                if !t.is_finite() {
                    return Err(CorpusError::NonNumericCell { row, col: 1, cell: cells[0].to_string() });
                }
                if timestamps.last().is_some_and(|&prev| !(prev < t)) {
                    return Err(CorpusError::NonMonotonicTimestamps { row });
                }
                timestamps.push(t);
                for (c, cell) in cells[offset..].iter().enumerate() {
                    values.push(parse_cell(cell, row, c + offset + 1)?);
                }
            }
        }
        StreamKind::Au => {
            let Some((_, header)) = lines.next() else {
                return Ok(FrameSeries::empty(kind));
            };
            let delimiter = numeric_delimiter(header);
            let header = split_cells(header, delimiter);
            let find = |name: &str| {
                header
                    .iter()
                    .position(|h| h.eq_ignore_ascii_case(name))
                    .ok_or_else(|| CorpusError::MissingColumn(name.to_string()))
            };
            let time_col = find("timestamp")?;
            let cols = names.iter().map(|n| find(n)).collect::<Result<Vec<_>, _>>()?;
            for (i, line) in lines {
                let row = i + 1;
                let cells = split_cells(line, delimiter);
                if cells.len() != header.len() {
                    return Err(CorpusError::ColumnCountMismatch { row, expected: header.len(), found: cells.len() });
                }
                let t = parse_cell(cells[time_col], row, time_col + 1)?;
                if !t.is_finite() {
                    return Err(CorpusError::NonNumericCell { row, col: time_col + 1, cell: cells[time_col].to_string() });
                }
                if timestamps.last().is_some_and(|&prev| !(prev < t)) {
                    return Err(CorpusError::NonMonotonicTimestamps { row });
                }
                timestamps.push(t);
                for &c in &cols {
                    values.push(parse_cell(cells[c], row, c + 1)?);
                }
            }
        }
    }
    Ok(FrameSeries { timestamps, values, channel_names: names })
}

/// One session: labels, transcript and the three frame streams.
#[derive(Debug, Clone)]
pub struct Session {
    pub meta: SessionMeta,
    pub transcript: Vec<Utterance>,
    pub covarep: FrameSeries,
    pub formant: FrameSeries,
    pub aus: FrameSeries,
}

#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub sessions: Vec<Session>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.sessions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sessions.is_empty()
    }

    pub fn in_splits(&self, splits: &[Split]) -> impl Iterator<Item = &Session> {
        let splits = splits.to_vec();
        self.sessions.iter().filter(move |s| splits.contains(&s.meta.split))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub transcript_path: PathBuf,
    pub covarep_path: PathBuf,
    pub formant_path: PathBuf,
    pub au_path: PathBuf,
    pub gender: u8,
    pub phq8: u8,
    pub split: Split,
}

/// Session manifest. Relative paths resolve against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub sessions: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn parse(raw: &str, toml_syntax: bool) -> Result<Self, CorpusError> {
        if toml_syntax {
            toml::from_str(raw).map_err(|e| CorpusError::Manifest(e.to_string()))
        } else {
            serde_json::from_str(raw).map_err(|e| CorpusError::Manifest(e.to_string()))
        }
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        let mut seen = HashSet::new();
        for e in &self.sessions {
            let bad = |reason: &str| CorpusError::InvalidSession { session_id: e.id.clone(), reason: reason.to_string() };
            if !seen.insert(e.id.as_str()) {
                return Err(bad("duplicate session id"));
            }
            if e.gender > 1 {
                return Err(bad("gender must be 0 or 1"));
            }
            if e.phq8 > PHQ8_MAX {
                return Err(bad("phq8 must lie in [0, 24]"));
            }
        }
        Ok(())
    }
}

pub fn read_file(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| {
        if source.kind() == io::ErrorKind::NotFound {
            CorpusError::FileNotFound { session_id: None, path: path.to_path_buf() }
        } else {
            CorpusError::Io { path: path.to_path_buf(), source }
        }
    })
}

fn load_session(entry: &ManifestEntry, base: &Path) -> Result<Session, CorpusError> {
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
    let load = || -> Result<Session, CorpusError> {
        let transcript = parse_transcript(&read_file(&resolve(&entry.transcript_path))?)?;
        let covarep = load_frame_series(&read_file(&resolve(&entry.covarep_path))?, StreamKind::Covarep)?;
        let formant = load_frame_series(&read_file(&resolve(&entry.formant_path))?, StreamKind::Formant)?;
        let aus = load_frame_series(&read_file(&resolve(&entry.au_path))?, StreamKind::Au)?;
        Ok(Session {
            meta: SessionMeta {
                session_id: entry.id.clone(),
                gender: entry.gender,
                phq8: entry.phq8,
                split: entry.split,
            },
            transcript,
            covarep,
            formant,
            aus,
        })
    };
    load().map_err(|e| e.in_session(&entry.id))
}

/// Loads every session of a manifest in manifest order.
///
/// A `.toml` extension selects TOML syntax; anything else is read as JSON.
pub fn load_dataset(manifest_path: &Path) -> Result<Dataset, CorpusError> {
    let raw = read_file(manifest_path)?;
    let toml_syntax = manifest_path.extension().is_some_and(|e| e.eq_ignore_ascii_case("toml"));
    let manifest = Manifest::parse(&raw, toml_syntax)?;
    manifest.validate()?;
    let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let loaded = exec::map(&manifest.sessions, |entry| load_session(entry, base));
    let sessions = loaded.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { sessions })
}
