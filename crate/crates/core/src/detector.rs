//! Stimulus-frequency classification of signal windows, offline and over a
//! sample stream.
//!
//! Each candidate is scored with the SNR ratio of [`spectral::snr_db`]
//! (its magnitude over the mean of the other candidates). Every window is
//! filtered from zero state, so a streamed window and the same slice
//! classified offline produce bit-identical decisions.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::time::{Duration, Instant};
use thiserror::Error;

use crate::filters::{self, BandpassSpec, FilterCoefficients, FilterError};
use crate::model::{self, ModelError, Recording};
use crate::spectral::{self, SpectralError};

#[derive(Debug, Error)]
pub enum DetectorError {
    #[error("window of {samples} samples shorter than one second ({min} samples)")]
    WindowTooShort { samples: usize, min: usize },
    #[error("stream ended")]
    StreamEnded,
    #[error("invalid detector config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub window_start_s: f64,
    pub chosen_hz: Option<f64>,
    /// `(stimulus Hz, score dB)` in stimulus-set order.
    pub scores: Vec<(f64, f64)>,
    /// Best score minus the runner-up.
    pub confidence_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorConfig {
    pub stimulus_set: Vec<f64>,
    pub min_margin_db: f64,
    pub filter: BandpassSpec,
    pub zero_phase: bool,
    pub pad_factor: usize,
    pub window_s: f64,
    pub hop_s: f64,
    pub channel: String,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            stimulus_set: model::DEFAULT_STIMULUS_SET.to_vec(),
            min_margin_db: 1.0,
            filter: BandpassSpec::paper(),
            zero_phase: false,
            pad_factor: 8,
            window_s: 2.0,
            hop_s: 1.0,
            channel: "ear".into(),
        }
    }
}

/// A configured classifier bound to a sample rate.
#[derive(Debug, Clone)]
pub struct Detector {
    cfg: DetectorConfig,
    fs: f64,
    filter: FilterCoefficients,
    window: usize,
    hop: usize,
}

impl Detector {
    pub fn new(cfg: DetectorConfig, fs: f64) -> Result<Self, DetectorError> {
        if cfg.stimulus_set.len() < 2 {
            return Err(DetectorError::InvalidConfig("need at least 2 stimulus frequencies".into()));
        }
        if !(cfg.hop_s > 0.0 && cfg.hop_s <= cfg.window_s) {
            return Err(DetectorError::InvalidConfig(format!("hop {} s must be in (0, window {} s]", cfg.hop_s, cfg.window_s)));
        }
        let window = model::seconds_to_samples(cfg.window_s, fs);
        let min = model::seconds_to_samples(1.0, fs);
        if window < min {
            return Err(DetectorError::WindowTooShort { samples: window, min });
        }
        let hop = model::seconds_to_samples(cfg.hop_s, fs).max(1);
        let filter = cfg.filter.clone().with_fs(fs).design()?;
        Ok(Self { cfg, fs, filter, window, hop })
    }

    pub fn config(&self) -> &DetectorConfig {
        &self.cfg
    }

    pub fn window_samples(&self) -> usize {
        self.window
    }

    pub fn hop_samples(&self) -> usize {
        self.hop
    }

    /// Classify one window of at least one second.
    pub fn classify(&self, x: &[f64], window_start_s: f64) -> Result<Decision, DetectorError> {
        let min = model::seconds_to_samples(1.0, self.fs);
        if x.len() < min {
            return Err(DetectorError::WindowTooShort { samples: x.len(), min });
        }
        let y = if self.cfg.zero_phase {
            filters::apply_filter_zero_phase(&self.filter, x)?
        } else {
            filters::apply_filter(&self.filter, x)
        };
        let pad = (self.cfg.pad_factor.max(1) * y.len()).next_power_of_two();
        let spec = spectral::dft_magnitude(&y, self.fs, pad)?;
        let mags: Vec<(f64, f64)> = self.cfg.stimulus_set.iter().map(|&hz| (hz, spec.magnitude_at(hz))).collect();
        let scores = self
            .cfg
            .stimulus_set
            .iter()
            .map(|&hz| Ok((hz, spectral::snr_db(&mags, hz)?)))
            .collect::<Result<Vec<_>, SpectralError>>()?;
        Ok(decide(window_start_s, scores, self.cfg.min_margin_db))
    }

    /// Offline windows at `0, hop, 2·hop, ...` while a full window fits.
    pub fn classify_windows(&self, x: &[f64]) -> Result<Vec<Decision>, DetectorError> {
        let mut out = Vec::new();
        let mut start = 0;
        while start + self.window <= x.len() {
            out.push(self.classify(&x[start..start + self.window], start as f64 / self.fs)?);
            start += self.hop;
        }
        Ok(out)
    }
}

/// Argmax with ties toward the lower frequency; abstain below `min_margin_db`.
fn decide(window_start_s: f64, scores: Vec<(f64, f64)>, min_margin_db: f64) -> Decision {
    let mut best = 0;
    for i in 1..scores.len() {
        let (hz, s) = scores[i];
        if s > scores[best].1 || (s == scores[best].1 && hz < scores[best].0) {
            best = i;
        }
    }
    let runner_up = scores
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != best)
        .map(|(_, (_, s))| *s)
        .fold(f64::NEG_INFINITY, f64::max);
    let margin = scores[best].1 - runner_up;
    Decision {
        window_start_s,
        chosen_hz: (margin >= min_margin_db).then_some(scores[best].0),
        scores,
        confidence_db: margin,
    }
}

/// One-shot classification with a freshly designed filter.
pub fn classify_window(x: &[f64], fs: f64, cfg: &DetectorConfig) -> Result<Decision, DetectorError> {
    Detector::new(cfg.clone(), fs)?.classify(x, 0.0)
}

/// Sliding-window detector fed one sample at a time.
#[derive(Debug, Clone)]
pub struct StreamDetector {
    detector: Detector,
    buffer: VecDeque<f64>,
    consumed: usize,
    next_start: usize,
}

impl StreamDetector {
    pub fn new(detector: Detector) -> Self {
        let cap = detector.window;
        Self { detector, buffer: VecDeque::with_capacity(cap), consumed: 0, next_start: 0 }
    }

    /// Add a sample; returns a decision when a window completes.
    pub fn push(&mut self, sample: f64) -> Option<Result<Decision, DetectorError>> {
        self.buffer.push_back(sample);
        self.consumed += 1;
        if self.buffer.len() > self.detector.window {
            self.buffer.pop_front();
        }
        if self.consumed != self.next_start + self.detector.window {
            return None;
        }
        let start = self.next_start;
        self.next_start += self.detector.hop;
        let window = self.buffer.make_contiguous();
        Some(self.detector.classify(window, start as f64 / self.detector.fs))
    }

    /// Pull samples until the next decision; `Err(StreamEnded)` once the source runs dry.
    pub fn next_decision<I: Iterator<Item = f64>>(&mut self, source: &mut I) -> Result<Decision, DetectorError> {
        for sample in source.by_ref() {
            if let Some(d) = self.push(sample) {
                return d;
            }
        }
        Err(DetectorError::StreamEnded)
    }
}

/// Run a stream to completion and collect its decisions.
pub fn stream_detect<I: IntoIterator<Item = f64>>(source: I, fs: f64, cfg: &DetectorConfig) -> Result<Vec<Decision>, DetectorError> {
    let mut det = StreamDetector::new(Detector::new(cfg.clone(), fs)?);
    let mut source = source.into_iter();
    let mut out = Vec::new();
    loop {
        match det.next_decision(&mut source) {
            Ok(d) => out.push(d),
            Err(DetectorError::StreamEnded) => return Ok(out),
            Err(e) => return Err(e),
        }
    }
}

/// Samples of one channel in order, optionally paced at the sample rate.
pub struct ReplayStream<'a> {
    samples: &'a [f64],
    pos: usize,
    pacing: Option<(Instant, f64)>,
}

impl Iterator for ReplayStream<'_> {
    type Item = f64;

    fn next(&mut self) -> Option<f64> {
        let v = *self.samples.get(self.pos)?;
        if let Some((t0, fs)) = self.pacing {
            let due = t0 + Duration::from_secs_f64(self.pos as f64 / fs);
            let now = Instant::now();
            if due > now {
                std::thread::sleep(due - now);
            }
        }
        self.pos += 1;
        Some(v)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let n = self.samples.len() - self.pos;
        (n, Some(n))
    }
}

pub fn replay_stream<'a>(rec: &'a Recording, channel: &str, realtime: bool) -> Result<ReplayStream<'a>, DetectorError> {
    let samples = rec.channel(channel)?;
    Ok(ReplayStream { samples, pos: 0, pacing: realtime.then(|| (Instant::now(), rec.sample_rate())) })
}
