//! Normalization, Pearson correlation with its p-value, box-plot summaries
//! and the pooled per-segment amplitude dataset.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use std::collections::BTreeMap;
use thiserror::Error;

use crate::filters::FilterCoefficients;
use crate::model::{ChannelRoles, Recording, Session};
use crate::spectral::{self, AnalysisConfig, SpectralError};

#[derive(Debug, Error)]
pub enum StatsError {
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series is constant")]
    ConstantSeries,
    #[error("need at least {min} values, got {len}")]
    TooFewValues { len: usize, min: usize },
    #[error("permutation count {0} below 1000")]
    TooFewIterations(usize),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `(x - min) / (max - min)`.
pub fn normalize_unit_interval(x: &[f64]) -> Result<Vec<f64>, StatsError> {
    if x.len() < 2 {
        return Err(StatsError::TooFewValues { len: x.len(), min: 2 });
    }
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(StatsError::ConstantSeries);
    }
    let span = hi - lo;
    Ok(x.iter().map(|v| (v - lo) / span).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    pub p_two_sided: f64,
}

fn centered(x: &[f64]) -> (Vec<f64>, f64) {
    let mean = x.iter().sum::<f64>() / x.len() as f64;
    let c: Vec<f64> = x.iter().map(|v| v - mean).collect();
    let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
    (c, norm)
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatsError::TooFewValues { len: x.len(), min: 3 });
    }
    Ok(())
}

fn sample_r(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y)?;
    let (xc, nx) = centered(x);
    let (yc, ny) = centered(y);
    if nx == 0.0 || ny == 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    let dot: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum();
    Ok((dot / (nx * ny)).clamp(-1.0, 1.0))
}

/// Two-sided p of the t-test for a correlation `r` over `n` pairs.
pub fn t_test_p(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    let one_minus = 1.0 - r * r;
    if one_minus <= 0.0 {
        return 0.0;
    }
    let t2 = r * r * df / one_minus;
    beta_reg(df / 2.0, 0.5, df / (df + t2)).clamp(0.0, 1.0)
}

pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<CorrelationResult, StatsError> {
    let r = sample_r(x, y)?;
    Ok(CorrelationResult { r, n: x.len(), p_two_sided: t_test_p(r, x.len()) })
}

/// Permutation p-value for `|r|`, smoothed as `(hits + 1) / (iters + 1)`.
pub fn permutation_p(x: &[f64], y: &[f64], iters: usize, seed: u64) -> Result<f64, StatsError> {
    if iters < 1000 {
        return Err(StatsError::TooFewIterations(iters));
    }
    let observed = sample_r(x, y)?.abs();
    let (xc, nx) = centered(x);
    let (mut yc, ny) = centered(y);
    let scale = 1.0 / (nx * ny);
    // relative slack so that the identity permutation counts as a hit
    let threshold = observed * (1.0 - 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..iters {
        yc.shuffle(&mut rng);
        let r: f64 = xc.iter().zip(&yc).map(|(a, b)| a * b).sum::<f64>() * scale;
        if r.abs() >= threshold {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (iters + 1) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    /// Most extreme values still inside the 1.5×IQR fences.
    pub whisker_lo: f64,
    pub whisker_hi: f64,
    /// Values beyond the fences, ascending.
    pub outliers: Vec<f64>,
}

/// Type-7 quantile of sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats, StatsError> {
    if values.is_empty() {
        return Err(StatsError::Empty);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let (fence_lo, fence_hi) = (q1 - 1.5 * iqr, q3 + 1.5 * iqr);
    let inside = || sorted.iter().copied().filter(|v| *v >= fence_lo && *v <= fence_hi);
    Ok(BoxStats {
        min: sorted[0],
        q1,
        median: quantile_sorted(&sorted, 0.5),
        q3,
        max: *sorted.last().unwrap(),
        whisker_lo: inside().next().unwrap_or(q1),
        whisker_hi: inside().next_back().unwrap_or(q3),
        outliers: sorted.iter().copied().filter(|v| *v < fence_lo || *v > fence_hi).collect(),
    })
}

/// Per-segment peak amplitudes of one trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentAmplitudes {
    pub participant: String,
    pub stimulus_hz: f64,
    pub occipital: Vec<f64>,
    pub ear: Vec<f64>,
}

/// Largest FFT magnitude inside the analysis band for each segment of a
/// trial, for the occipital average and the ear channel.
pub fn segment_amplitudes(
    trial: &Recording,
    roles: &ChannelRoles,
    filter: &FilterCoefficients,
    cfg: &AnalysisConfig,
) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    let fs = trial.sample_rate();
    let (occ, ear) = spectral::role_series(trial, roles, filter, cfg)?;
    let (lo, hi) = cfg.analysis_band;
    let per_segment = |x: &[f64]| -> Result<Vec<f64>, StatsError> {
        spectral::segment_series(x, fs, cfg.segment_s)?
            .into_iter()
            .map(|seg| {
                let spec = spectral::dft_magnitude(seg, fs, cfg.pad_for(seg.len()))?;
                Ok(spec
                    .freqs
                    .iter()
                    .zip(&spec.magnitudes)
                    .filter(|(f, _)| **f >= lo && **f <= hi)
                    .map(|(_, m)| *m)
                    .fold(0.0, f64::max))
            })
            .collect()
    };
    Ok((per_segment(&occ)?, per_segment(&ear)?))
}

/// Paired normalized amplitudes for one stimulus frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPairs {
    pub stimulus_hz: f64,
    pub occipital: Vec<f64>,
    pub ear: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AmplitudeDataset {
    /// Ordered as the session's stimulus set; frequencies without trials are omitted.
    pub frequencies: Vec<FrequencyPairs>,
}

impl AmplitudeDataset {
    pub fn is_empty(&self) -> bool {
        self.frequencies.iter().all(|f| f.occipital.is_empty())
    }

    pub fn get(&self, stimulus_hz: f64) -> Option<&FrequencyPairs> {
        self.frequencies.iter().find(|f| (f.stimulus_hz - stimulus_hz).abs() < 1e-9)
    }
}

/// Normalize each participant's amplitudes to `[0, 1]` per role, then pool
/// the segments of every trial by stimulus frequency. Trials keep their
/// input order within a frequency.
pub fn assemble_dataset(stimulus_set: &[f64], trials: &[SegmentAmplitudes]) -> Result<AmplitudeDataset, StatsError> {
    let mut by_participant: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        by_participant.entry(t.participant.as_str()).or_default().push(i);
    }
    let mut normalized: Vec<(Vec<f64>, Vec<f64>)> = vec![Default::default(); trials.len()];
    for idx in by_participant.values() {
        let occ: Vec<f64> = idx.iter().flat_map(|&i| trials[i].occipital.iter().copied()).collect();
        let ear: Vec<f64> = idx.iter().flat_map(|&i| trials[i].ear.iter().copied()).collect();
        let (occ, ear) = (normalize_unit_interval(&occ)?, normalize_unit_interval(&ear)?);
        let (mut a, mut b) = (0, 0);
        for &i in idx {
            let (n_occ, n_ear) = (trials[i].occipital.len(), trials[i].ear.len());
            normalized[i] = (occ[a..a + n_occ].to_vec(), ear[b..b + n_ear].to_vec());
            a += n_occ;
            b += n_ear;
        }
    }
    let mut frequencies = Vec::new();
    for &hz in stimulus_set {
        let mut pairs = FrequencyPairs { stimulus_hz: hz, occipital: Vec::new(), ear: Vec::new() };
        for (t, (occ, ear)) in trials.iter().zip(&normalized) {
            if (t.stimulus_hz - hz).abs() < 1e-9 {
                pairs.occipital.extend(occ);
                pairs.ear.extend(ear);
            }
        }
        if !pairs.occipital.is_empty() {
            frequencies.push(pairs);
        }
    }
    Ok(AmplitudeDataset { frequencies })
}

pub fn amplitude_dataset(session: &Session, cfg: &AnalysisConfig) -> Result<AmplitudeDataset, StatsError> {
    let manifest = &session.manifest;
    if session.trials.is_empty() {
        return Ok(AmplitudeDataset::default());
    }
    let filter = cfg.design_filter(session.trials[0].sample_rate()).map_err(SpectralError::from)?;
    let trials = session
        .iter()
        .map(|(spec, rec)| {
            let (occipital, ear) = segment_amplitudes(rec, &manifest.channel_roles, &filter, cfg)?;
            Ok(SegmentAmplitudes { participant: spec.participant.clone(), stimulus_hz: spec.stimulus_hz, occipital, ear })
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    assemble_dataset(&manifest.stimulus_set, &trials)
}
