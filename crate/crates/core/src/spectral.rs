//! Segmentation, FFT magnitude spectra and the SSVEP response metrics.
//!
//! Whole-trial spectra (zero-padded to ≥ 8× the trial length) give the
//! peak frequency, SNR and −3 dB bandwidth of a trial; one-second
//! segments feed the per-segment amplitude distributions in [`crate::stats`].

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;
use thiserror::Error;

use crate::filters::{self, BandpassSpec, FilterCoefficients, FilterError};
use crate::model::{self, ChannelRole, ChannelRoles, ModelError, Recording};

#[derive(Debug, Error)]
pub enum SpectralError {
    #[error("series of {len} samples shorter than one {needed}-sample segment")]
    SeriesTooShort { len: usize, needed: usize },
    #[error("pad length {pad_to} shorter than segment length {len}")]
    BadPadLength { pad_to: usize, len: usize },
    #[error("band [{lo}, {hi}] Hz covers fewer than 3 spectrum bins")]
    EmptyBand { lo: f64, hi: f64 },
    #[error("mean magnitude of the non-target frequencies is zero")]
    ZeroDenominator,
    #[error("target {0} Hz not among the stimulus magnitudes")]
    UnknownTarget(f64),
    #[error("need at least 2 stimulus magnitudes, got {0}")]
    TooFewCandidates(usize),
    #[error("non-positive magnitude {mag} at {hz} Hz")]
    NonPositiveMagnitude { hz: f64, mag: f64 },
    #[error("no spectral peak near {0} Hz")]
    NoPeak(f64),
    #[error("window of {samples} samples too short (need >= {min})")]
    WindowTooShort { samples: usize, min: usize },
    #[error("overlap {0} outside [0, 1)")]
    InvalidOverlap(f64),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One-sided magnitude spectrum on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentSpectrum {
    pub freqs: Vec<f64>,
    pub magnitudes: Vec<f64>,
    pub segment_index: usize,
    pub source_channel: String,
}

impl SegmentSpectrum {
    pub fn resolution(&self) -> f64 {
        if self.freqs.len() > 1 {
            self.freqs[1] - self.freqs[0]
        } else {
            0.0
        }
    }

    /// Index of the grid point nearest `hz` (lower index on ties).
    pub fn nearest_bin(&self, hz: f64) -> usize {
        let df = self.resolution();
        if df <= 0.0 {
            return 0;
        }
        let raw = (hz - self.freqs[0]) / df;
        let idx = if raw.fract() == 0.5 { raw.floor() } else { raw.round() };
        idx.clamp(0.0, (self.freqs.len() - 1) as f64) as usize
    }

    pub fn magnitude_at(&self, hz: f64) -> f64 {
        self.magnitudes[self.nearest_bin(hz)]
    }

    /// Largest magnitude within `±half_width` Hz of `hz`.
    pub fn local_peak_magnitude(&self, hz: f64, half_width: f64) -> f64 {
        self.freqs
            .iter()
            .zip(&self.magnitudes)
            .filter(|(f, _)| (**f - hz).abs() <= half_width)
            .map(|(_, m)| *m)
            .fold(self.magnitude_at(hz), f64::max)
    }

    /// Copy of the bins inside `[lo, hi]`.
    pub fn restrict(&self, lo: f64, hi: f64) -> SegmentSpectrum {
        let (freqs, magnitudes) = self
            .freqs
            .iter()
            .zip(&self.magnitudes)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, m)| (*f, *m))
            .unzip();
        SegmentSpectrum { freqs, magnitudes, segment_index: self.segment_index, source_channel: self.source_channel.clone() }
    }

    pub fn labeled(mut self, segment_index: usize, source_channel: impl Into<String>) -> Self {
        self.segment_index = segment_index;
        self.source_channel = source_channel.into();
        self
    }
}

/// Non-overlapping segments of `round(seg_s·fs)` samples; the remainder is dropped.
pub fn segment_series(x: &[f64], fs: f64, seg_s: f64) -> Result<Vec<&[f64]>, SpectralError> {
    let needed = model::seconds_to_samples(seg_s, fs);
    if needed == 0 || x.len() < needed {
        return Err(SpectralError::SeriesTooShort { len: x.len(), needed: needed.max(1) });
    }
    Ok(x.chunks_exact(needed).collect())
}

/// Next power of two at or above eight times `len`.
pub fn default_pad(len: usize) -> usize {
    (8 * len.max(1)).next_power_of_two()
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Full complex DFT of `x` zero-padded to `n` points.
pub(crate) fn fft_padded(x: &[f64], n: usize) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(n, Complex64::new(0.0, 0.0));
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_forward(n));
    fft.process(&mut buf);
    buf
}

pub(crate) fn ifft(buf: &mut [Complex64]) {
    let fft = PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()));
    fft.process(buf);
}

/// Unscaled one-sided magnitude spectrum `|X_k|`, `k = 0..=pad_to/2`.
pub fn dft_magnitude(segment: &[f64], fs: f64, pad_to: usize) -> Result<SegmentSpectrum, SpectralError> {
    if pad_to < segment.len() || pad_to == 0 {
        return Err(SpectralError::BadPadLength { pad_to, len: segment.len() });
    }
    let spectrum = fft_padded(segment, pad_to);
    let bins = pad_to / 2 + 1;
    let df = fs / pad_to as f64;
    Ok(SegmentSpectrum {
        freqs: (0..bins).map(|k| k as f64 * df).collect(),
        magnitudes: spectrum[..bins].iter().map(|c| c.norm()).collect(),
        segment_index: 0,
        source_channel: String::new(),
    })
}

/// Frequency of the largest magnitude in `[band_lo, band_hi]`, refined by a
/// parabola through the peak bin and its neighbours.
pub fn peak_frequency(spec: &SegmentSpectrum, band_lo: f64, band_hi: f64) -> Result<f64, SpectralError> {
    let in_band: Vec<usize> = (0..spec.freqs.len())
        .filter(|&i| spec.freqs[i] >= band_lo && spec.freqs[i] <= band_hi)
        .collect();
    if in_band.len() < 3 {
        return Err(SpectralError::EmptyBand { lo: band_lo, hi: band_hi });
    }
    let mut best = in_band[0];
    for &i in &in_band[1..] {
        if spec.magnitudes[i] > spec.magnitudes[best] {
            best = i;
        }
    }
    let mut hz = spec.freqs[best];
    if best > 0 && best + 1 < spec.magnitudes.len() {
        let (a, b, c) = (spec.magnitudes[best - 1], spec.magnitudes[best], spec.magnitudes[best + 1]);
        let denom = a - 2.0 * b + c;
        if denom < 0.0 {
            let delta = (0.5 * (a - c) / denom).clamp(-0.5, 0.5);
            hz += delta * spec.resolution();
        }
    }
    let lo = spec.freqs[in_band[0]];
    let hi = spec.freqs[*in_band.last().unwrap()];
    Ok(hz.clamp(lo, hi))
}

/// `20·log10(|target| / mean|others|)` over the stimulus magnitudes.
pub fn snr_db(mags_at_stimuli: &[(f64, f64)], target: f64) -> Result<f64, SpectralError> {
    if mags_at_stimuli.len() < 2 {
        return Err(SpectralError::TooFewCandidates(mags_at_stimuli.len()));
    }
    let pos = mags_at_stimuli
        .iter()
        .position(|(hz, _)| (hz - target).abs() < 1e-9)
        .ok_or(SpectralError::UnknownTarget(target))?;
    let (hz, signal) = mags_at_stimuli[pos];
    if !(signal > 0.0) {
        return Err(SpectralError::NonPositiveMagnitude { hz, mag: signal });
    }
    let others: f64 = mags_at_stimuli.iter().enumerate().filter(|(i, _)| *i != pos).map(|(_, (_, m))| m).sum();
    let mean = others / (mags_at_stimuli.len() - 1) as f64;
    if !(mean > 0.0) {
        return Err(SpectralError::ZeroDenominator);
    }
    Ok(20.0 * (signal / mean).log10())
}

/// Width between the half-power crossings around a peak.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bandwidth {
    pub width_hz: f64,
    pub lower_hz: f64,
    pub upper_hz: f64,
    /// A side never dropped below half power before the spectrum edge.
    pub clipped: bool,
}

pub fn bandwidth_3db(spec: &SegmentSpectrum, peak_hz: f64) -> Result<Bandwidth, SpectralError> {
    if spec.freqs.is_empty() {
        return Err(SpectralError::NoPeak(peak_hz));
    }
    let power: Vec<f64> = spec.magnitudes.iter().map(|m| m * m).collect();
    let mut idx = spec.nearest_bin(peak_hz);
    // climb to the local maximum the interpolated peak sits on
    loop {
        if idx + 1 < power.len() && power[idx + 1] > power[idx] {
            idx += 1;
        } else if idx > 0 && power[idx - 1] > power[idx] {
            idx -= 1;
        } else {
            break;
        }
    }
    let peak = power[idx];
    if !(peak > 0.0) {
        return Err(SpectralError::NoPeak(peak_hz));
    }
    let half = peak / 2.0;
    let df = spec.resolution();
    let mut clipped = false;

    let mut i = idx;
    while i > 0 && power[i - 1] >= half {
        i -= 1;
    }
    let lower_hz = if i == 0 {
        clipped = true;
        spec.freqs[0]
    } else {
        let frac = (power[i] - half) / (power[i] - power[i - 1]);
        spec.freqs[i] - frac * df
    };

    let mut j = idx;
    while j + 1 < power.len() && power[j + 1] >= half {
        j += 1;
    }
    let upper_hz = if j + 1 == power.len() {
        clipped = true;
        spec.freqs[j]
    } else {
        let frac = (power[j] - half) / (power[j] - power[j + 1]);
        spec.freqs[j] + frac * df
    };

    Ok(Bandwidth { width_hz: upper_hz - lower_hz, lower_hz, upper_hz, clipped })
}

/// Short-time power spectra restricted to a band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrogramGrid {
    /// Frame centers in seconds.
    pub times: Vec<f64>,
    pub freqs: Vec<f64>,
    /// `power[frame][bin]`, one-sided power spectral density.
    pub power: Vec<Vec<f64>>,
    pub window_s: f64,
    pub overlap_fraction: f64,
}

/// Periodic Hann window.
pub fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()).collect()
}

pub fn spectrogram(
    x: &[f64],
    fs: f64,
    window_s: f64,
    overlap: f64,
    band_lo: f64,
    band_hi: f64,
) -> Result<SpectrogramGrid, SpectralError> {
    let n_win = model::seconds_to_samples(window_s, fs);
    if n_win < 8 {
        return Err(SpectralError::WindowTooShort { samples: n_win, min: 8 });
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(SpectralError::InvalidOverlap(overlap));
    }
    if x.len() < n_win {
        return Err(SpectralError::SeriesTooShort { len: x.len(), needed: n_win });
    }
    let hop = ((n_win as f64 * (1.0 - overlap)).round() as usize).max(1);
    let window = hann(n_win);
    let scale = 1.0 / (fs * window.iter().map(|w| w * w).sum::<f64>());
    let df = fs / n_win as f64;
    let nyquist_bin = n_win.is_multiple_of(2).then_some(n_win / 2);
    let bins: Vec<usize> = (0..=n_win / 2)
        .filter(|&k| {
            let f = k as f64 * df;
            f >= band_lo && f <= band_hi
        })
        .collect();

    let mut times = Vec::new();
    let mut power = Vec::new();
    let mut frame = vec![0.0; n_win];
    let mut start = 0;
    while start + n_win <= x.len() {
        for (dst, (s, w)) in frame.iter_mut().zip(x[start..start + n_win].iter().zip(&window)) {
            *dst = s * w;
        }
        let spec = fft_padded(&frame, n_win);
        power.push(
            bins.iter()
                .map(|&k| {
                    let one_sided = if k == 0 || Some(k) == nyquist_bin { 1.0 } else { 2.0 };
                    spec[k].norm_sqr() * scale * one_sided
                })
                .collect(),
        );
        times.push((start as f64 + n_win as f64 / 2.0) / fs);
        start += hop;
    }
    Ok(SpectrogramGrid {
        times,
        freqs: bins.iter().map(|&k| k as f64 * df).collect(),
        power,
        window_s,
        overlap_fraction: overlap,
    })
}

/// Parameters of the trial analysis pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub filter: BandpassSpec,
    pub zero_phase: bool,
    /// Peak search band; defaults to the filter passband.
    pub analysis_band: (f64, f64),
    pub segment_s: f64,
    /// Zero-pad factor before rounding up to a power of two.
    pub pad_factor: usize,
    /// Read SNR magnitudes at the local maximum within this many Hz of each
    /// stimulus instead of the nearest bin.
    pub local_peak_hz: Option<f64>,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        let filter = BandpassSpec::paper();
        Self {
            analysis_band: (filter.pass_lo, filter.pass_hi),
            filter,
            zero_phase: false,
            segment_s: 1.0,
            pad_factor: 8,
            local_peak_hz: None,
        }
    }
}

impl AnalysisConfig {
    pub fn pad_for(&self, len: usize) -> usize {
        (self.pad_factor.max(1) * len.max(1)).next_power_of_two()
    }

    pub fn design_filter(&self, fs: f64) -> Result<FilterCoefficients, FilterError> {
        self.filter.clone().with_fs(fs).design()
    }

    pub fn run_filter(&self, f: &FilterCoefficients, x: &[f64]) -> Result<Vec<f64>, FilterError> {
        if self.zero_phase {
            filters::apply_filter_zero_phase(f, x)
        } else {
            Ok(filters::apply_filter(f, x))
        }
    }

    pub fn stimulus_magnitudes(&self, spec: &SegmentSpectrum, stimulus_set: &[f64]) -> Vec<(f64, f64)> {
        stimulus_set
            .iter()
            .map(|&hz| {
                let m = match self.local_peak_hz {
                    Some(w) => spec.local_peak_magnitude(hz, w),
                    None => spec.magnitude_at(hz),
                };
                (hz, m)
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SsvepMetrics {
    pub peak_hz: f64,
    pub snr_db: f64,
    pub bandwidth_hz: f64,
    pub bandwidth_clipped: bool,
    pub stimulus_hz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialMetrics {
    pub occipital: SsvepMetrics,
    pub ear: SsvepMetrics,
}

impl TrialMetrics {
    pub fn get(&self, role: ChannelRole) -> &SsvepMetrics {
        match role {
            ChannelRole::Occipital => &self.occipital,
            ChannelRole::Ear => &self.ear,
        }
    }
}

/// Filtered occipital-average and ear series of a trial.
pub fn role_series(
    trial: &Recording,
    roles: &ChannelRoles,
    filter: &FilterCoefficients,
    cfg: &AnalysisConfig,
) -> Result<(Vec<f64>, Vec<f64>), SpectralError> {
    let mut filtered = Vec::with_capacity(roles.occipital.len());
    for id in &roles.occipital {
        filtered.push(cfg.run_filter(filter, trial.channel(id)?)?);
    }
    let n = trial.duration_samples();
    let scale = 1.0 / filtered.len() as f64;
    let occipital = (0..n).map(|i| filtered.iter().map(|c| c[i]).sum::<f64>() * scale).collect();
    let ear = cfg.run_filter(filter, trial.channel(&roles.ear)?)?;
    Ok((occipital, ear))
}

/// Peak, SNR and bandwidth of one series from its whole-trial spectrum.
pub fn series_metrics(
    x: &[f64],
    fs: f64,
    stimulus_set: &[f64],
    stimulus_hz: f64,
    cfg: &AnalysisConfig,
) -> Result<SsvepMetrics, SpectralError> {
    let spec = dft_magnitude(x, fs, cfg.pad_for(x.len()))?;
    let (lo, hi) = cfg.analysis_band;
    let peak_hz = peak_frequency(&spec, lo, hi)?;
    let snr = snr_db(&cfg.stimulus_magnitudes(&spec, stimulus_set), stimulus_hz)?;
    let bw = bandwidth_3db(&spec.restrict(lo, hi), peak_hz)?;
    Ok(SsvepMetrics { peak_hz, snr_db: snr, bandwidth_hz: bw.width_hz, bandwidth_clipped: bw.clipped, stimulus_hz })
}

/// Full trial pipeline: filter, average occipital channels, whole-trial
/// spectrum, then peak/SNR/bandwidth per role.
pub fn trial_metrics(
    trial: &Recording,
    roles: &ChannelRoles,
    stimulus_set: &[f64],
    stimulus_hz: f64,
    cfg: &AnalysisConfig,
) -> Result<TrialMetrics, SpectralError> {
    let filter = cfg.design_filter(trial.sample_rate())?;
    trial_metrics_with(trial, roles, stimulus_set, stimulus_hz, cfg, &filter)
}

/// [`trial_metrics`] with a pre-designed filter.
pub fn trial_metrics_with(
    trial: &Recording,
    roles: &ChannelRoles,
    stimulus_set: &[f64],
    stimulus_hz: f64,
    cfg: &AnalysisConfig,
    filter: &FilterCoefficients,
) -> Result<TrialMetrics, SpectralError> {
    if !stimulus_set.iter().any(|&f| (f - stimulus_hz).abs() < 1e-9) {
        return Err(SpectralError::UnknownTarget(stimulus_hz));
    }
    let fs = trial.sample_rate();
    let (occ, ear) = role_series(trial, roles, filter, cfg)?;
    Ok(TrialMetrics {
        occipital: series_metrics(&occ, fs, stimulus_set, stimulus_hz, cfg)?,
        ear: series_metrics(&ear, fs, stimulus_set, stimulus_hz, cfg)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cosine(freq: f64, fs: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| (2.0 * PI * freq * i as f64 / fs).cos()).collect()
    }

    #[test]
    fn segmentation_counts() {
        let x = vec![0.0; 7500];
        assert_eq!(segment_series(&x, 250.0, 1.0).unwrap().len(), 30);
        let x = vec![0.0; 7501];
        let segs = segment_series(&x, 250.0, 1.0).unwrap();
        assert_eq!(segs.len(), 30);
        assert!(segs.iter().all(|s| s.len() == 250));
        assert!(matches!(segment_series(&[0.0; 100], 250.0, 1.0), Err(SpectralError::SeriesTooShort { .. })));
    }

    #[test]
    fn cosine_on_bin_gives_half_n() {
        let n = 250;
        let x = cosine(10.0, 250.0, n);
        let spec = dft_magnitude(&x, 250.0, n).unwrap();
        assert_eq!(spec.freqs.len(), 126);
        assert_relative_eq!(spec.magnitudes[10], n as f64 / 2.0, epsilon = 1e-9);
        for (k, m) in spec.magnitudes.iter().enumerate() {
            if k != 10 {
                assert!(*m < 1e-9, "bin {k}: {m}");
            }
        }
    }

    #[test]
    fn zero_segment_and_bad_pad() {
        let spec = dft_magnitude(&[0.0; 16], 250.0, 32).unwrap();
        assert!(spec.magnitudes.iter().all(|&m| m == 0.0));
        assert!(matches!(dft_magnitude(&[0.0; 16], 250.0, 8), Err(SpectralError::BadPadLength { .. })));
    }

    #[test]
    fn padded_nine_hz_peak_within_one_step() {
        let x = cosine(9.0, 250.0, 250);
        let spec = dft_magnitude(&x, 250.0, 8192).unwrap();
        // naive DFT argmax on the same grid as the oracle
        let n = 8192;
        let naive_mag = |k: usize| -> f64 {
            let w = 2.0 * PI * k as f64 / n as f64;
            x.iter().enumerate().map(|(t, v)| v * Complex64::from_polar(1.0, -w * t as f64)).sum::<Complex64>().norm()
        };
        let lo = (7.0 * n as f64 / 250.0) as usize;
        let hi = (11.0 * n as f64 / 250.0) as usize;
        let oracle = (lo..hi).max_by(|a, b| naive_mag(*a).total_cmp(&naive_mag(*b))).unwrap();
        let ours = spec.nearest_bin(peak_frequency(&spec, 7.0, 11.0).unwrap());
        assert_eq!(ours, oracle);
        assert!((spec.freqs[ours] - 9.0).abs() <= spec.resolution());
    }

    fn single_bin_spectrum(hz: f64) -> SegmentSpectrum {
        let freqs: Vec<f64> = (0..=125).map(|k| k as f64).collect();
        let magnitudes = freqs.iter().map(|&f| if f == hz { 1.0 } else { 0.0 }).collect();
        SegmentSpectrum { freqs, magnitudes, segment_index: 0, source_channel: String::new() }
    }

    #[test]
    fn peak_on_single_bin_and_tie_break() {
        assert_eq!(peak_frequency(&single_bin_spectrum(11.0), 6.0, 14.0).unwrap(), 11.0);
        let freqs: Vec<f64> = (0..=125).map(|k| k as f64).collect();
        let flat = SegmentSpectrum { magnitudes: vec![1.0; freqs.len()], freqs, segment_index: 0, source_channel: String::new() };
        assert_eq!(peak_frequency(&flat, 100.0, 110.0).unwrap(), 100.0);
        assert!(matches!(peak_frequency(&flat, 10.2, 11.5), Err(SpectralError::EmptyBand { .. })));
    }

    #[test]
    fn snr_examples() {
        let m = [(7.0, 10.0), (9.0, 1.0), (11.0, 1.0), (13.0, 1.0)];
        assert!((snr_db(&m, 7.0).unwrap() - 20.0).abs() < 1e-12);
        let eq = [(7.0, 3.0), (9.0, 3.0), (11.0, 3.0), (13.0, 3.0)];
        for t in [7.0, 9.0, 11.0, 13.0] {
            assert!(snr_db(&eq, t).unwrap().abs() < 1e-12);
        }
        let mixed = [(7.0, 2.0), (9.0, 1.0), (11.0, 2.0), (13.0, 3.0)];
        assert!(snr_db(&mixed, 7.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn snr_errors() {
        let m = [(7.0, 1.0), (9.0, 0.0), (11.0, 0.0)];
        assert!(matches!(snr_db(&m, 7.0), Err(SpectralError::ZeroDenominator)));
        assert!(matches!(snr_db(&m, 8.0), Err(SpectralError::UnknownTarget(_))));
        assert!(matches!(snr_db(&m[..1], 7.0), Err(SpectralError::TooFewCandidates(1))));
    }

    #[test]
    fn single_bin_bandwidth_is_one_step() {
        let bw = bandwidth_3db(&single_bin_spectrum(11.0), 11.0).unwrap();
        assert_relative_eq!(bw.width_hz, 1.0, epsilon = 1e-12);
        assert_relative_eq!(bw.lower_hz, 10.5, epsilon = 1e-12);
        assert!(!bw.clipped);
    }

    #[test]
    fn bandwidth_clipped_at_spectrum_edge() {
        let freqs: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let spec = SegmentSpectrum {
            magnitudes: vec![1.0, 1.0, 0.9, 0.5, 0.1, 0.0, 0.0, 0.0, 0.0, 0.0],
            freqs,
            segment_index: 0,
            source_channel: String::new(),
        };
        let bw = bandwidth_3db(&spec, 0.0).unwrap();
        assert!(bw.clipped);
        assert_eq!(bw.lower_hz, 0.0);
        assert!(bandwidth_3db(&single_bin_spectrum(500.0).restrict(20.0, 30.0), 25.0).is_err());
    }

    #[test]
    fn spectrogram_shapes_and_zero_input() {
        let g = spectrogram(&vec![0.0; 250 * 15], 250.0, 1.0, 0.5, 5.0, 40.0).unwrap();
        assert_eq!(g.times.len(), 29);
        assert_eq!(g.freqs.first(), Some(&5.0));
        assert_eq!(g.freqs.last(), Some(&40.0));
        assert!(g.power.iter().all(|row| row.len() == g.freqs.len() && row.iter().all(|&p| p == 0.0)));
        assert!(matches!(spectrogram(&[0.0; 100], 250.0, 0.02, 0.5, 5.0, 40.0), Err(SpectralError::WindowTooShort { .. })));
        assert!(spectrogram(&[0.0; 1000], 250.0, 1.0, 1.0, 5.0, 40.0).is_err());
    }

    #[test]
    fn spectrogram_tracks_stationary_tone() {
        let x = cosine(9.0, 250.0, 250 * 15);
        let g = spectrogram(&x, 250.0, 1.0, 0.5, 5.0, 40.0).unwrap();
        for row in &g.power {
            let k = (0..row.len()).max_by(|a, b| row[*a].total_cmp(&row[*b])).unwrap();
            assert_eq!(g.freqs[k], 9.0);
        }
    }

    #[test]
    fn spectrogram_follows_frequency_step() {
        let fs = 250.0;
        let mut x = cosine(7.0, fs, 250 * 8);
        x.extend(cosine(13.0, fs, 250 * 8));
        let g = spectrogram(&x, fs, 1.0, 0.5, 5.0, 40.0).unwrap();
        let argmax: Vec<f64> = g
            .power
            .iter()
            .map(|row| g.freqs[(0..row.len()).max_by(|a, b| row[*a].total_cmp(&row[*b])).unwrap()])
            .collect();
        for (t, f) in g.times.iter().zip(&argmax) {
            if *t < 7.5 {
                assert_eq!(*f, 7.0, "t={t}");
            } else if *t > 8.5 {
                assert_eq!(*f, 13.0, "t={t}");
            }
        }
    }
}
