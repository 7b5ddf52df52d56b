//! Recordings, trials, session manifests and their CSV formats.
//!
//! Recording files carry one sample per row and one channel per column;
//! the header names each channel as `<id>_uV`. Time is implicit from the
//! sample rate, which is supplied by the caller.

use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;
pub const DEFAULT_STIMULUS_SET: [f64; 4] = [7.0, 9.0, 11.0, 13.0];
pub const MANIFEST_HEADER: [&str; 6] = ["trial_id", "participant", "stimulus_hz", "file", "start_s", "duration_s"];

const CHANNEL_SUFFIX: &str = "_uV";
/// Significant digits written for each sample.
pub const SAMPLE_DIGITS: usize = 9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: u64, reason: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    RaggedRow { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column}: non-numeric sample {value:?}")]
    NonNumericSample { line: u64, column: usize, value: String },
    #[error("trial window [{start_s}, {start_s}+{duration_s}] s outside recording of {available_s} s")]
    WindowOutOfRange { start_s: f64, duration_s: f64, available_s: f64 },
    #[error("unknown channel {0:?}")]
    UnknownChannel(String),
    #[error("invalid recording: {0}")]
    InvalidRecording(String),
    #[error("manifest line {line}: {reason}")]
    MalformedManifest { line: u64, reason: String },
    #[error("invalid session: {0}")]
    InvalidSession(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> ModelError + '_ {
    move |source| ModelError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    /// Samples in microvolts.
    pub samples: Vec<f64>,
}

/// Multichannel recording with equal-length channels and unique ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    sample_rate: f64,
    channels: Vec<Channel>,
}

impl Recording {
    pub fn new(sample_rate: f64, channels: Vec<Channel>) -> Result<Self, ModelError> {
        if !(sample_rate.is_finite() && sample_rate > 0.0) {
            return Err(ModelError::InvalidRecording(format!("sample rate {sample_rate} must be > 0")));
        }
        let mut seen = HashSet::new();
        for ch in &channels {
            if ch.id.is_empty() {
                return Err(ModelError::InvalidRecording("empty channel id".into()));
            }
            if !seen.insert(ch.id.as_str()) {
                return Err(ModelError::InvalidRecording(format!("duplicate channel id {:?}", ch.id)));
            }
        }
        if let Some(first) = channels.first() {
            let len = first.samples.len();
            if let Some(bad) = channels.iter().find(|c| c.samples.len() != len) {
                return Err(ModelError::InvalidRecording(format!(
                    "channel {:?} has {} samples, expected {len}",
                    bad.id,
                    bad.samples.len()
                )));
            }
        }
        Ok(Self { sample_rate, channels })
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn duration_samples(&self) -> usize {
        self.channels.first().map_or(0, |c| c.samples.len())
    }

    pub fn duration_s(&self) -> f64 {
        self.duration_samples() as f64 / self.sample_rate
    }

    pub fn channel(&self, id: &str) -> Result<&[f64], ModelError> {
        self.channels
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.samples.as_slice())
            .ok_or_else(|| ModelError::UnknownChannel(id.to_string()))
    }

    pub fn channel_ids(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.id.as_str())
    }
}

/// Seconds to samples, rounding half away from zero.
pub fn seconds_to_samples(seconds: f64, fs: f64) -> usize {
    (seconds * fs).round().max(0.0) as usize
}

/// Format with [`SAMPLE_DIGITS`] significant digits, shortest plain form.
pub fn format_sample(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return if v.is_finite() { "0".into() } else { format!("{v}") };
    }
    let exp = v.abs().log10().floor() as i32;
    if !(-6..15).contains(&exp) {
        return format!("{:.*e}", SAMPLE_DIGITS - 1, v);
    }
    let decimals = (SAMPLE_DIGITS as i32 - 1 - exp).max(0) as usize;
    let s = format!("{v:.decimals$}");
    if s.contains('.') {
        let t = s.trim_end_matches('0').trim_end_matches('.');
        if t == "-0" { "0".into() } else { t.to_string() }
    } else {
        s
    }
}

/// Parse a recording from CSV text.
pub fn read_recording<R: Read>(reader: R, sample_rate: f64) -> Result<Recording, ModelError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec?,
        None => return Err(ModelError::MalformedHeader { line: 1, reason: "empty file".into() }),
    };
    let header_line = header.position().map_or(1, |p| p.line());
    let mut ids = Vec::with_capacity(header.len());
    for field in header.iter() {
        let id = field.strip_suffix(CHANNEL_SUFFIX).filter(|id| !id.is_empty()).ok_or_else(|| {
            ModelError::MalformedHeader { line: header_line, reason: format!("column {field:?} is not <id>{CHANNEL_SUFFIX}") }
        })?;
        if ids.contains(&id.to_string()) {
            return Err(ModelError::MalformedHeader { line: header_line, reason: format!("duplicate channel {id:?}") });
        }
        ids.push(id.to_string());
    }

    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); ids.len()];
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != ids.len() {
            return Err(ModelError::RaggedRow { line, expected: ids.len(), found: rec.len() });
        }
        for (col, (field, out)) in rec.iter().zip(columns.iter_mut()).enumerate() {
            let v: f64 = field
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| ModelError::NonNumericSample { line, column: col + 1, value: field.to_string() })?;
            out.push(v);
        }
    }

    let channels = ids.into_iter().zip(columns).map(|(id, samples)| Channel { id, samples }).collect();
    Recording::new(sample_rate, channels)
}

pub fn load_recording(path: impl AsRef<Path>, sample_rate: f64) -> Result<Recording, ModelError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    read_recording(io::BufReader::new(file), sample_rate)
}

pub fn write_recording_to<W: Write>(rec: &Recording, mut out: W) -> io::Result<()> {
    let header: Vec<String> = rec.channels.iter().map(|c| format!("{}{CHANNEL_SUFFIX}", c.id)).collect();
    writeln!(out, "{}", header.join(","))?;
    let mut line = String::new();
    for i in 0..rec.duration_samples() {
        line.clear();
        for (j, ch) in rec.channels.iter().enumerate() {
            if j > 0 {
                line.push(',');
            }
            line.push_str(&format_sample(ch.samples[i]));
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    out.flush()
}

pub fn write_recording(rec: &Recording, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    let file = File::create(path).map_err(io_err(path))?;
    write_recording_to(rec, BufWriter::new(file)).map_err(io_err(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub trial_id: String,
    pub participant: String,
    pub stimulus_hz: f64,
    pub start_s: f64,
    pub duration_s: f64,
}

/// Cut the trial window out of a recording; all channels are kept.
pub fn slice_trial(rec: &Recording, spec: &TrialSpec) -> Result<Recording, ModelError> {
    let fs = rec.sample_rate;
    let out_of_range = || ModelError::WindowOutOfRange {
        start_s: spec.start_s,
        duration_s: spec.duration_s,
        available_s: rec.duration_s(),
    };
    if !(spec.start_s >= 0.0 && spec.duration_s > 0.0) || !spec.start_s.is_finite() || !spec.duration_s.is_finite() {
        return Err(out_of_range());
    }
    let start = seconds_to_samples(spec.start_s, fs);
    let count = seconds_to_samples(spec.duration_s, fs);
    if count == 0 || start + count > rec.duration_samples() {
        return Err(out_of_range());
    }
    let channels = rec
        .channels
        .iter()
        .map(|c| Channel { id: c.id.clone(), samples: c.samples[start..start + count].to_vec() })
        .collect();
    Ok(Recording { sample_rate: fs, channels })
}

/// Element-wise arithmetic mean of the named channels.
pub fn average_channels(rec: &Recording, ids: &[&str]) -> Result<Vec<f64>, ModelError> {
    if ids.is_empty() {
        return Err(ModelError::UnknownChannel(String::new()));
    }
    let series = ids.iter().map(|id| rec.channel(id)).collect::<Result<Vec<_>, _>>()?;
    let scale = 1.0 / series.len() as f64;
    Ok((0..rec.duration_samples())
        .map(|i| series.iter().map(|s| s[i]).sum::<f64>() * scale)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelRole {
    Occipital,
    Ear,
}

impl ChannelRole {
    pub fn as_str(self) -> &'static str {
        match self {
            ChannelRole::Occipital => "occipital",
            ChannelRole::Ear => "ear",
        }
    }
}

/// Channel id → role assignment for a session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRoles {
    pub occipital: Vec<String>,
    pub ear: String,
}

impl Default for ChannelRoles {
    fn default() -> Self {
        Self { occipital: vec!["o1".into(), "o2".into()], ear: "ear".into() }
    }
}

impl ChannelRoles {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.occipital.is_empty() {
            return Err(ModelError::InvalidSession("at least one occipital channel required".into()));
        }
        if self.occipital.contains(&self.ear) {
            return Err(ModelError::InvalidSession(format!("channel {:?} has two roles", self.ear)));
        }
        Ok(())
    }

    pub fn role_of(&self, id: &str) -> Option<ChannelRole> {
        if self.ear == id {
            Some(ChannelRole::Ear)
        } else if self.occipital.iter().any(|o| o == id) {
            Some(ChannelRole::Occipital)
        } else {
            None
        }
    }

    pub fn occipital_ids(&self) -> Vec<&str> {
        self.occipital.iter().map(String::as_str).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialEntry {
    pub spec: TrialSpec,
    /// Path as written in the manifest (relative to the manifest directory).
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionManifest {
    pub stimulus_set: Vec<f64>,
    pub trials: Vec<TrialEntry>,
    pub channel_roles: ChannelRoles,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRow {
    trial_id: String,
    participant: String,
    stimulus_hz: f64,
    file: String,
    start_s: f64,
    duration_s: f64,
}

impl SessionManifest {
    pub fn new(stimulus_set: Vec<f64>, channel_roles: ChannelRoles) -> Self {
        Self { stimulus_set, trials: Vec::new(), channel_roles }
    }

    /// Parse manifest rows and check them against the stimulus set.
    /// Referenced files are checked by [`Session::load`].
    pub fn read<R: Read>(reader: R, stimulus_set: &[f64], channel_roles: ChannelRoles) -> Result<Self, ModelError> {
        channel_roles.validate()?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        if header != MANIFEST_HEADER {
            return Err(ModelError::MalformedManifest {
                line: 1,
                reason: format!("header must be {}", MANIFEST_HEADER.join(",")),
            });
        }
        let mut trials = Vec::new();
        let mut ids = HashSet::new();
        for row in rdr.deserialize::<ManifestRow>() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                ModelError::MalformedManifest { line, reason: e.to_string() }
            })?;
            let line = trials.len() as u64 + 2;
            if !stimulus_set.iter().any(|&f| (f - row.stimulus_hz).abs() < 1e-9) {
                return Err(ModelError::MalformedManifest {
                    line,
                    reason: format!("stimulus {} Hz not in stimulus set {stimulus_set:?}", row.stimulus_hz),
                });
            }
            if !(row.start_s >= 0.0 && row.duration_s > 0.0) {
                return Err(ModelError::MalformedManifest { line, reason: "need start_s >= 0 and duration_s > 0".into() });
            }
            if !ids.insert(row.trial_id.clone()) {
                return Err(ModelError::MalformedManifest { line, reason: format!("duplicate trial id {:?}", row.trial_id) });
            }
            trials.push(TrialEntry {
                spec: TrialSpec {
                    trial_id: row.trial_id,
                    participant: row.participant,
                    stimulus_hz: row.stimulus_hz,
                    start_s: row.start_s,
                    duration_s: row.duration_s,
                },
                file: PathBuf::from(row.file),
            });
        }
        Ok(Self { stimulus_set: stimulus_set.to_vec(), trials, channel_roles })
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<(), ModelError> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(MANIFEST_HEADER)?;
        for t in &self.trials {
            wtr.write_record([
                t.spec.trial_id.clone(),
                t.spec.participant.clone(),
                format_sample(t.spec.stimulus_hz),
                t.file.to_string_lossy().into_owned(),
                format_sample(t.spec.start_s),
                format_sample(t.spec.duration_s),
            ])?;
        }
        wtr.flush().map_err(|e| ModelError::Csv(e.into()))
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let path = path.as_ref();
        let file = File::create(path).map_err(io_err(path))?;
        self.write_to(BufWriter::new(file))
    }

    pub fn trial(&self, trial_id: &str) -> Option<&TrialEntry> {
        self.trials.iter().find(|t| t.spec.trial_id == trial_id)
    }
}

/// Options needed to interpret a manifest on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub sample_rate: f64,
    pub stimulus_set: Vec<f64>,
    pub channel_roles: ChannelRoles,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self {
            sample_rate: DEFAULT_SAMPLE_RATE,
            stimulus_set: DEFAULT_STIMULUS_SET.to_vec(),
            channel_roles: ChannelRoles::default(),
        }
    }
}

/// A manifest with every trial's window loaded and validated.
#[derive(Debug, Clone)]
pub struct Session {
    pub manifest: SessionManifest,
    /// Trial windows, index-aligned with `manifest.trials`.
    pub trials: Vec<Recording>,
}

impl Session {
    pub fn load(manifest_path: impl AsRef<Path>, opts: &SessionOptions) -> Result<Self, ModelError> {
        let manifest_path = manifest_path.as_ref();
        let file = File::open(manifest_path).map_err(io_err(manifest_path))?;
        let manifest = SessionManifest::read(file, &opts.stimulus_set, opts.channel_roles.clone())?;
        let base = manifest_path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_manifest(manifest, base, opts.sample_rate)
    }

    pub fn from_manifest(manifest: SessionManifest, base: &Path, sample_rate: f64) -> Result<Self, ModelError> {
        let roles = &manifest.channel_roles;
        let mut trials = Vec::with_capacity(manifest.trials.len());
        for entry in &manifest.trials {
            let rec = load_recording(base.join(&entry.file), sample_rate)?;
            for id in roles.occipital.iter().chain(std::iter::once(&roles.ear)) {
                rec.channel(id).map_err(|_| {
                    ModelError::InvalidSession(format!("{}: missing channel {id:?}", entry.file.display()))
                })?;
            }
            trials.push(slice_trial(&rec, &entry.spec)?);
        }
        Ok(Self { manifest, trials })
    }

    pub fn iter(&self) -> impl Iterator<Item = (&TrialSpec, &Recording)> {
        self.manifest.trials.iter().map(|t| &t.spec).zip(&self.trials)
    }

    pub fn trial(&self, trial_id: &str) -> Option<(&TrialSpec, &Recording)> {
        self.iter().find(|(spec, _)| spec.trial_id == trial_id)
    }
}
