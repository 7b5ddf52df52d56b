//! Python module `ssvep`: filters, spectra, statistics, synthesis and the
//! stimulus detector. Sample series are plain lists of floats.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use std::collections::BTreeMap;
use std::path::PathBuf;

use ssvep_core::detector::{self as det, Decision, DetectorConfig};
use ssvep_core::filters::{self, BandpassSpec, FilterCoefficients};
use ssvep_core::model::{self, Session, SessionOptions};
use ssvep_core::spectral::{self, AnalysisConfig, SegmentSpectrum};
use ssvep_core::stats;
use ssvep_core::synth::{self, SessionConfig, SynthConfig};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn model_err(e: model::ModelError) -> PyErr {
    match e {
        model::ModelError::Io { .. } => PyIOError::new_err(e.to_string()),
        other => value_err(other),
    }
}

fn spectrum(freqs: Vec<f64>, magnitudes: Vec<f64>) -> PyResult<SegmentSpectrum> {
    if freqs.len() != magnitudes.len() {
        return Err(PyValueError::new_err("freqs and magnitudes differ in length"));
    }
    Ok(SegmentSpectrum { freqs, magnitudes, segment_index: 0, source_channel: String::new() })
}

/// Elliptic bandpass filter as cascaded second-order sections.
#[pyclass(name = "Filter", module = "ssvep")]
pub struct PyFilter {
    inner: FilterCoefficients,
}

#[pymethods]
impl PyFilter {
    #[new]
    #[pyo3(signature = (order=4, pass_band=(6.0, 14.0), stop_band=(5.0, 15.0), ripple_db=1.0, atten_db=None, fs=250.0))]
    fn new(order: usize, pass_band: (f64, f64), stop_band: (f64, f64), ripple_db: f64, atten_db: Option<f64>, fs: f64) -> PyResult<Self> {
        let spec = BandpassSpec {
            order,
            pass_lo: pass_band.0,
            pass_hi: pass_band.1,
            stop_lo: stop_band.0,
            stop_hi: stop_band.1,
            ripple_db,
            atten_db,
            fs,
        };
        Ok(Self { inner: spec.design().map_err(value_err)? })
    }

    /// `(b0, b1, b2, a1, a2)` per section.
    #[getter]
    fn sections(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        self.inner.sections.iter().map(|s| (s.b0, s.b1, s.b2, s.a1, s.a2)).collect()
    }

    #[getter]
    fn sample_rate(&self) -> f64 {
        self.inner.sample_rate
    }

    /// Stopband attenuation reached by the design, in dB.
    #[getter]
    fn stopband_atten_db(&self) -> Option<f64> {
        self.inner.design.as_ref().map(|d| d.stopband_atten_db)
    }

    fn is_stable(&self) -> bool {
        self.inner.is_stable()
    }

    #[pyo3(signature = (x, zero_phase=false))]
    fn apply(&self, x: Vec<f64>, zero_phase: bool) -> PyResult<Vec<f64>> {
        if zero_phase {
            filters::apply_filter_zero_phase(&self.inner, &x).map_err(value_err)
        } else {
            Ok(filters::apply_filter(&self.inner, &x))
        }
    }

    /// Magnitude response in dB at the given frequencies.
    fn response_db(&self, freqs: Vec<f64>) -> PyResult<Vec<f64>> {
        let h = filters::frequency_response(&self.inner, &freqs).map_err(value_err)?;
        Ok(h.iter().map(|c| 20.0 * c.norm().log10()).collect())
    }

    fn __repr__(&self) -> String {
        format!("Filter(sections={}, fs={})", self.inner.sections.len(), self.inner.sample_rate)
    }
}

/// One-sided `|X_k|`; returns `(freqs, magnitudes)`.
#[pyfunction]
#[pyo3(signature = (x, fs, pad_to=None))]
fn dft_magnitude(x: Vec<f64>, fs: f64, pad_to: Option<usize>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let pad = pad_to.unwrap_or_else(|| spectral::default_pad(x.len()));
    let s = spectral::dft_magnitude(&x, fs, pad).map_err(value_err)?;
    Ok((s.freqs, s.magnitudes))
}

#[pyfunction]
fn peak_frequency(freqs: Vec<f64>, magnitudes: Vec<f64>, band_lo: f64, band_hi: f64) -> PyResult<f64> {
    spectral::peak_frequency(&spectrum(freqs, magnitudes)?, band_lo, band_hi).map_err(value_err)
}

/// SNR in dB of `target` against the mean of the other `(hz, magnitude)` pairs.
#[pyfunction]
fn snr_db(mags_at_stimuli: Vec<(f64, f64)>, target: f64) -> PyResult<f64> {
    spectral::snr_db(&mags_at_stimuli, target).map_err(value_err)
}

/// `(width_hz, clipped)`.
#[pyfunction]
fn bandwidth_3db(freqs: Vec<f64>, magnitudes: Vec<f64>, peak_hz: f64) -> PyResult<(f64, bool)> {
    let bw = spectral::bandwidth_3db(&spectrum(freqs, magnitudes)?, peak_hz).map_err(value_err)?;
    Ok((bw.width_hz, bw.clipped))
}

/// `(times, freqs, power)` with `power[frame][bin]`.
#[pyfunction]
#[pyo3(signature = (x, fs, window_s=1.0, overlap=0.5, band=(5.0, 40.0)))]
fn spectrogram(x: Vec<f64>, fs: f64, window_s: f64, overlap: f64, band: (f64, f64)) -> PyResult<(Vec<f64>, Vec<f64>, Vec<Vec<f64>>)> {
    let g = spectral::spectrogram(&x, fs, window_s, overlap, band.0, band.1).map_err(value_err)?;
    Ok((g.times, g.freqs, g.power))
}

#[pyfunction]
fn normalize_unit_interval(x: Vec<f64>) -> PyResult<Vec<f64>> {
    stats::normalize_unit_interval(&x).map_err(value_err)
}

/// `(r, p_two_sided, n)`.
#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<(f64, f64, usize)> {
    let c = stats::pearson_r(&x, &y).map_err(value_err)?;
    Ok((c.r, c.p_two_sided, c.n))
}

#[pyfunction]
#[pyo3(signature = (x, y, iters=10_000, seed=0))]
fn permutation_p(x: Vec<f64>, y: Vec<f64>, iters: usize, seed: u64) -> PyResult<f64> {
    stats::permutation_p(&x, &y, iters, seed).map_err(value_err)
}

#[pyfunction]
fn box_stats<'py>(py: Python<'py>, values: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let b = stats::box_stats(&values).map_err(value_err)?;
    let d = PyDict::new(py);
    for (k, v) in [("min", b.min), ("q1", b.q1), ("median", b.median), ("q3", b.q3), ("max", b.max), ("whisker_lo", b.whisker_lo), ("whisker_hi", b.whisker_hi)] {
        d.set_item(k, v)?;
    }
    d.set_item("outliers", b.outliers)?;
    Ok(d)
}

#[pyfunction]
#[pyo3(signature = (f, duty, fs, duration_s))]
fn flicker_waveform(f: f64, duty: f64, fs: f64, duration_s: f64) -> PyResult<Vec<u8>> {
    synth::flicker_waveform(f, duty, fs, duration_s).map_err(value_err)
}

#[pyfunction]
fn pink_noise(n: usize, fs: f64, rms: f64, seed: u64) -> PyResult<Vec<f64>> {
    synth::pink_noise(n, fs, rms, seed).map_err(value_err)
}

/// Synthetic trial as `{channel_id: samples}`.
#[pyfunction]
#[pyo3(signature = (stimulus_hz, seed=0, duration_s=30.0, fs=250.0, fundamental_uv=10.0, noise_uv=10.0, harmonic_gains=vec![0.3], ear_attenuation=0.8, phase_rad=0.0))]
#[allow(clippy::too_many_arguments)]
fn generate_trial(
    stimulus_hz: f64,
    seed: u64,
    duration_s: f64,
    fs: f64,
    fundamental_uv: f64,
    noise_uv: f64,
    harmonic_gains: Vec<f64>,
    ear_attenuation: f64,
    phase_rad: f64,
) -> PyResult<BTreeMap<String, Vec<f64>>> {
    let cfg = SynthConfig { stimulus_hz, duration_s, fs, fundamental_uv, harmonic_gains, noise_uv, ear_attenuation, phase_rad, seed };
    let rec = synth::generate_trial(&cfg).map_err(value_err)?;
    Ok(rec.channels().iter().map(|c| (c.id.clone(), c.samples.clone())).collect())
}

/// Write a synthetic session into `out_dir`; returns the manifest path.
#[pyfunction]
#[pyo3(signature = (out_dir, seed=42, participants=5, trials_per_freq=5, duration_s=30.0, stimulus_set=vec![7.0, 9.0, 11.0, 13.0]))]
fn generate_session(out_dir: PathBuf, seed: u64, participants: usize, trials_per_freq: usize, duration_s: f64, stimulus_set: Vec<f64>) -> PyResult<PathBuf> {
    let cfg = SessionConfig {
        stimulus_set,
        trials_per_freq,
        participants,
        base: SynthConfig { duration_s, ..SynthConfig::default() },
        seed,
        ..SessionConfig::default()
    };
    synth::generate_session(&cfg, &out_dir).map_err(value_err)?;
    Ok(out_dir.join("manifest.csv"))
}

/// Recording CSV as `{channel_id: samples}`.
#[pyfunction]
#[pyo3(signature = (path, fs=250.0))]
fn load_recording(path: PathBuf, fs: f64) -> PyResult<BTreeMap<String, Vec<f64>>> {
    let rec = model::load_recording(&path, fs).map_err(model_err)?;
    Ok(rec.channels().iter().map(|c| (c.id.clone(), c.samples.clone())).collect())
}

fn load_session(manifest: &PathBuf) -> PyResult<Session> {
    Session::load(manifest, &SessionOptions::default()).map_err(model_err)
}

/// Per-trial metrics with the default analysis configuration.
#[pyfunction]
fn analyze_session<'py>(py: Python<'py>, manifest: PathBuf) -> PyResult<Vec<Bound<'py, PyDict>>> {
    let session = load_session(&manifest)?;
    let cfg = AnalysisConfig::default();
    let roles = &session.manifest.channel_roles;
    let mut out = Vec::new();
    for (spec, rec) in session.iter() {
        let m = spectral::trial_metrics(rec, roles, &session.manifest.stimulus_set, spec.stimulus_hz, &cfg).map_err(value_err)?;
        for (role, r) in [("occipital", m.occipital), ("ear", m.ear)] {
            let d = PyDict::new(py);
            d.set_item("trial_id", &spec.trial_id)?;
            d.set_item("participant", &spec.participant)?;
            d.set_item("stimulus_hz", spec.stimulus_hz)?;
            d.set_item("role", role)?;
            d.set_item("peak_hz", r.peak_hz)?;
            d.set_item("snr_db", r.snr_db)?;
            d.set_item("bandwidth_hz", r.bandwidth_hz)?;
            out.push(d);
        }
    }
    Ok(out)
}

/// `[(stimulus_hz, r, p, n)]` for the occipital/ear segment amplitudes.
#[pyfunction]
fn correlate_session(manifest: PathBuf) -> PyResult<Vec<(f64, f64, f64, usize)>> {
    let session = load_session(&manifest)?;
    let ds = stats::amplitude_dataset(&session, &AnalysisConfig::default()).map_err(value_err)?;
    ds.frequencies
        .iter()
        .map(|f| {
            let c = stats::pearson_r(&f.occipital, &f.ear).map_err(value_err)?;
            Ok((f.stimulus_hz, c.r, c.p_two_sided, c.n))
        })
        .collect()
}

/// Stimulus-frequency classifier.
#[pyclass(name = "Detector", module = "ssvep")]
pub struct PyDetector {
    inner: det::Detector,
}

fn decision_dict<'py>(py: Python<'py>, d: &Decision) -> PyResult<Bound<'py, PyDict>> {
    let out = PyDict::new(py);
    out.set_item("window_start_s", d.window_start_s)?;
    out.set_item("chosen_hz", d.chosen_hz)?;
    out.set_item("scores", d.scores.clone())?;
    out.set_item("confidence_db", d.confidence_db)?;
    Ok(out)
}

#[pymethods]
impl PyDetector {
    #[new]
    #[pyo3(signature = (fs=250.0, stimulus_set=vec![7.0, 9.0, 11.0, 13.0], window_s=2.0, hop_s=1.0, min_margin_db=1.0))]
    fn new(fs: f64, stimulus_set: Vec<f64>, window_s: f64, hop_s: f64, min_margin_db: f64) -> PyResult<Self> {
        let cfg = DetectorConfig { stimulus_set, window_s, hop_s, min_margin_db, ..DetectorConfig::default() };
        Ok(Self { inner: det::Detector::new(cfg, fs).map_err(value_err)? })
    }

    #[pyo3(signature = (x, window_start_s=0.0))]
    fn classify<'py>(&self, py: Python<'py>, x: Vec<f64>, window_start_s: f64) -> PyResult<Bound<'py, PyDict>> {
        let d = self.inner.classify(&x, window_start_s).map_err(value_err)?;
        decision_dict(py, &d)
    }

    /// Sliding windows over a whole series.
    fn classify_windows<'py>(&self, py: Python<'py>, x: Vec<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let ds = self.inner.classify_windows(&x).map_err(value_err)?;
        ds.iter().map(|d| decision_dict(py, d)).collect()
    }

    /// Feed samples one at a time through the streaming detector.
    fn stream<'py>(&self, py: Python<'py>, x: Vec<f64>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let mut s = det::StreamDetector::new(self.inner.clone());
        let mut out = Vec::new();
        for v in x {
            if let Some(d) = s.push(v) {
                out.push(decision_dict(py, &d.map_err(value_err)?)?);
            }
        }
        Ok(out)
    }
}

#[pymodule]
fn ssvep(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFilter>()?;
    m.add_class::<PyDetector>()?;
    m.add_function(wrap_pyfunction!(dft_magnitude, m)?)?;
    m.add_function(wrap_pyfunction!(peak_frequency, m)?)?;
    m.add_function(wrap_pyfunction!(snr_db, m)?)?;
    m.add_function(wrap_pyfunction!(bandwidth_3db, m)?)?;
    m.add_function(wrap_pyfunction!(spectrogram, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_unit_interval, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(permutation_p, m)?)?;
    m.add_function(wrap_pyfunction!(box_stats, m)?)?;
    m.add_function(wrap_pyfunction!(flicker_waveform, m)?)?;
    m.add_function(wrap_pyfunction!(pink_noise, m)?)?;
    m.add_function(wrap_pyfunction!(generate_trial, m)?)?;
    m.add_function(wrap_pyfunction!(generate_session, m)?)?;
    m.add_function(wrap_pyfunction!(load_recording, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_session, m)?)?;
    m.add_function(wrap_pyfunction!(correlate_session, m)?)?;
    Ok(())
}
