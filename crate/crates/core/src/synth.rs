//! Deterministic synthetic SSVEP recordings and sessions.
//!
//! Each trial is a sinusoid at the stimulus frequency plus harmonics on
//! O1/O2, an attenuated copy on the ear channel, and independent 1/f noise
//! on every channel. All randomness comes from seeded ChaCha generators.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

use crate::model::{
    self, Channel, ChannelRoles, ModelError, Recording, SessionManifest, TrialEntry, TrialSpec,
};
use crate::spectral;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("duty cycle {0} outside (0, 1)")]
    InvalidDuty(f64),
    #[error("{stimulus_hz} Hz with {harmonics} harmonics reaches the Nyquist frequency {nyquist} Hz")]
    AliasingConfig { stimulus_hz: f64, harmonics: usize, nyquist: f64 },
    #[error("need at least 16 samples, got {0}")]
    TooFewSamples(usize),
    #[error("invalid synthesis config: {0}")]
    InvalidConfig(String),
    #[error("cannot create {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Binary flicker: on while `frac(t·f) < duty`.
pub fn flicker_waveform(f: f64, duty: f64, fs: f64, duration_s: f64) -> Result<Vec<u8>, SynthError> {
    if !(duty > 0.0 && duty < 1.0) {
        return Err(SynthError::InvalidDuty(duty));
    }
    if !(f > 0.0 && f < fs / 2.0) {
        return Err(SynthError::AliasingConfig { stimulus_hz: f, harmonics: 0, nyquist: fs / 2.0 });
    }
    let n = model::seconds_to_samples(duration_s, fs);
    Ok((0..n).map(|i| u8::from((i as f64 * f / fs).fract() < duty)).collect())
}

/// SplitMix64 finalizer used to derive independent sub-seeds.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise with power density proportional to `1/f` above 1 Hz, scaled to
/// exactly `rms`.
///
/// For `k = 1..=n/2` in ascending order a standard normal real part and
/// then imaginary part are drawn and scaled by `1/sqrt(f_k)`; bins below
/// 1 Hz and DC are zero, the Nyquist bin (even `n`) keeps only its real
/// part. The Hermitian spectrum is inverted and rescaled.
pub fn pink_noise(n: usize, fs: f64, rms: f64, seed: u64) -> Result<Vec<f64>, SynthError> {
    if n < 16 {
        return Err(SynthError::TooFewSamples(n));
    }
    if rms == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec = vec![Complex64::new(0.0, 0.0); n];
    for k in 1..=n / 2 {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let f = k as f64 * fs / n as f64;
        if f < 1.0 {
            continue;
        }
        let g = 1.0 / f.sqrt();
        if 2 * k == n {
            spec[k] = Complex64::new(re * g, 0.0);
        } else {
            spec[k] = Complex64::new(re * g, im * g);
            spec[n - k] = spec[k].conj();
        }
    }
    spectral::ifft(&mut spec);
    let x: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let current = (x.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if current == 0.0 {
        return Ok(x);
    }
    let scale = rms / current;
    Ok(x.into_iter().map(|v| v * scale).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub stimulus_hz: f64,
    pub duration_s: f64,
    pub fs: f64,
    pub fundamental_uv: f64,
    /// Relative amplitudes of the 2nd, 3rd, ... harmonics.
    pub harmonic_gains: Vec<f64>,
    pub noise_uv: f64,
    pub ear_attenuation: f64,
    pub phase_rad: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            stimulus_hz: 7.0,
            duration_s: 30.0,
            fs: model::DEFAULT_SAMPLE_RATE,
            fundamental_uv: 10.0,
            harmonic_gains: vec![0.3],
            noise_uv: 10.0,
            ear_attenuation: 0.8,
            phase_rad: 0.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        let nyquist = self.fs / 2.0;
        let harmonics = self.harmonic_gains.len();
        if !(self.stimulus_hz > 0.0) || self.stimulus_hz * (1 + harmonics) as f64 >= nyquist {
            return Err(SynthError::AliasingConfig { stimulus_hz: self.stimulus_hz, harmonics, nyquist });
        }
        if !(self.noise_uv >= 0.0) || !(self.fundamental_uv >= 0.0) {
            return Err(SynthError::InvalidConfig("amplitudes must be non-negative".into()));
        }
        if !(self.ear_attenuation > 0.0 && self.ear_attenuation <= 1.0) {
            return Err(SynthError::InvalidConfig(format!("ear_attenuation {} outside (0, 1]", self.ear_attenuation)));
        }
        if !(self.duration_s > 0.0 && self.fs > 0.0) {
            return Err(SynthError::InvalidConfig("duration and sample rate must be positive".into()));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        model::seconds_to_samples(self.duration_s, self.fs)
    }

    /// Noise-free evoked response before the ear attenuation.
    pub fn deterministic_component(&self) -> Vec<f64> {
        let w = 2.0 * PI * self.stimulus_hz / self.fs;
        (0..self.n_samples())
            .map(|i| {
                let t = w * i as f64;
                let harmonics: f64 = self
                    .harmonic_gains
                    .iter()
                    .enumerate()
                    .map(|(h, g)| {
                        let m = (h + 2) as f64;
                        g * (m * t + m * self.phase_rad).sin()
                    })
                    .sum();
                self.fundamental_uv * ((t + self.phase_rad).sin() + harmonics)
            })
            .collect()
    }
}

pub const CHANNEL_IDS: [&str; 3] = ["o1", "o2", "ear"];

/// Three-channel trial `o1, o2, ear`.
pub fn generate_trial(cfg: &SynthConfig) -> Result<Recording, SynthError> {
    cfg.validate()?;
    let n = cfg.n_samples();
    let signal = cfg.deterministic_component();
    let mut channels = Vec::with_capacity(3);
    for (stream, id) in CHANNEL_IDS.iter().enumerate() {
        let gain = if *id == "ear" { cfg.ear_attenuation } else { 1.0 };
        let noise = pink_noise(n, cfg.fs, cfg.noise_uv, derive_seed(cfg.seed, stream as u64))?;
        let samples = signal.iter().zip(&noise).map(|(s, e)| gain * s + e).collect();
        channels.push(Channel { id: (*id).to_string(), samples });
    }
    Ok(Recording::new(cfg.fs, channels)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub stimulus_set: Vec<f64>,
    pub trials_per_freq: usize,
    pub participants: usize,
    pub base: SynthConfig,
    pub seed: u64,
    /// Each trial's fundamental is scaled by a factor drawn uniformly from
    /// `[1 - spread, 1 + spread]`.
    pub gain_spread: f64,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            stimulus_set: model::DEFAULT_STIMULUS_SET.to_vec(),
            trials_per_freq: 5,
            participants: 5,
            base: SynthConfig::default(),
            seed: 42,
            gain_spread: 0.5,
        }
    }
}

/// One planned trial of a session.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedTrial {
    pub spec: TrialSpec,
    pub file: PathBuf,
    pub config: SynthConfig,
}

fn hz_label(hz: f64) -> String {
    format!("{hz}")
}

impl SessionConfig {
    /// Per-trial configurations in manifest order (participant, frequency, trial).
    pub fn plan(&self) -> Result<Vec<PlannedTrial>, SynthError> {
        if self.trials_per_freq == 0 || self.participants == 0 || self.stimulus_set.is_empty() {
            return Err(SynthError::InvalidConfig("session counts must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.gain_spread) {
            return Err(SynthError::InvalidConfig(format!("gain_spread {} outside [0, 1)", self.gain_spread)));
        }
        let mut out = Vec::new();
        for p in 1..=self.participants {
            for (fi, &hz) in self.stimulus_set.iter().enumerate() {
                for t in 1..=self.trials_per_freq {
                    let index = (((p - 1) * self.stimulus_set.len() + fi) * self.trials_per_freq + t - 1) as u64;
                    let trial_seed = derive_seed(self.seed, index);
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(trial_seed, u64::MAX));
                    let gain = 1.0 + self.gain_spread * (2.0 * rng.random::<f64>() - 1.0);
                    let phase = 2.0 * PI * rng.random::<f64>();
                    let config = SynthConfig {
                        stimulus_hz: hz,
                        fundamental_uv: self.base.fundamental_uv * gain,
                        phase_rad: self.base.phase_rad + phase,
                        seed: trial_seed,
                        ..self.base.clone()
                    };
                    config.validate()?;
                    let trial_id = format!("p{p}_f{}_t{t}", hz_label(hz));
                    out.push(PlannedTrial {
                        spec: TrialSpec {
                            trial_id: trial_id.clone(),
                            participant: format!("p{p}"),
                            stimulus_hz: hz,
                            start_s: 0.0,
                            duration_s: self.base.duration_s,
                        },
                        file: PathBuf::from(format!("{trial_id}.csv")),
                        config,
                    });
                }
            }
        }
        Ok(out)
    }

    pub fn manifest(&self, plan: &[PlannedTrial]) -> SessionManifest {
        let mut manifest = SessionManifest::new(self.stimulus_set.clone(), ChannelRoles::default());
        manifest.trials = plan.iter().map(|t| TrialEntry { spec: t.spec.clone(), file: t.file.clone() }).collect();
        manifest
    }
}

/// Write every trial file and `manifest.csv` into `dir`.
pub fn generate_session(cfg: &SessionConfig, dir: &Path) -> Result<SessionManifest, SynthError> {
    let plan = cfg.plan()?;
    fs::create_dir_all(dir).map_err(|source| SynthError::Io { path: dir.to_path_buf(), source })?;
    for trial in &plan {
        model::write_recording(&generate_trial(&trial.config)?, dir.join(&trial.file))?;
    }
    let manifest = cfg.manifest(&plan);
    manifest.write(dir.join("manifest.csv"))?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{dft_magnitude, peak_frequency};

    #[test]
    fn flicker_examples() {
        assert_eq!(flicker_waveform(1.0, 0.5, 10.0, 1.0).unwrap(), vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(flicker_waveform(1.0, 0.25, 8.0, 1.0).unwrap(), vec![1, 1, 0, 0, 0, 0, 0, 0]);
        let w = flicker_waveform(7.0, 0.5, 250.0, 30.0).unwrap();
        let mean = w.iter().map(|&v| f64::from(v)).sum::<f64>() / w.len() as f64;
        assert!((mean - 0.5).abs() <= 1.0 / 210.0, "{mean}");
        assert!(matches!(flicker_waveform(7.0, 1.0, 250.0, 1.0), Err(SynthError::InvalidDuty(_))));
    }

    #[test]
    fn pink_noise_basics() {
        assert!(pink_noise(1024, 250.0, 0.0, 1).unwrap().iter().all(|&v| v == 0.0));
        let a = pink_noise(1000, 250.0, 3.0, 9).unwrap();
        assert_eq!(a, pink_noise(1000, 250.0, 3.0, 9).unwrap());
        assert_ne!(a, pink_noise(1000, 250.0, 3.0, 10).unwrap());
        let rms = (a.iter().map(|v| v * v).sum::<f64>() / a.len() as f64).sqrt();
        assert!((rms - 3.0).abs() < 0.03);
        assert!(matches!(pink_noise(8, 250.0, 1.0, 1), Err(SynthError::TooFewSamples(8))));
    }

    #[test]
    fn pink_noise_slope_is_minus_one() {
        let n = 1 << 14;
        let fs = 250.0;
        let mut avg = vec![0.0; n / 2 + 1];
        for seed in 0..50 {
            let x = pink_noise(n, fs, 1.0, seed).unwrap();
            let spec = dft_magnitude(&x, fs, n).unwrap();
            for (a, m) in avg.iter_mut().zip(&spec.magnitudes) {
                *a += m * m / 50.0;
            }
        }
        let pts: Vec<(f64, f64)> = (0..avg.len())
            .map(|k| (k as f64 * fs / n as f64, avg[k]))
            .filter(|(f, _)| (2.0..=100.0).contains(f))
            .map(|(f, p)| (f.log10(), p.log10()))
            .collect();
        let m = pts.len() as f64;
        let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
        let (mx, my) = (sx / m, sy / m);
        let slope = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / pts.iter().map(|(x, _)| (x - mx).powi(2)).sum::<f64>();
        assert!((slope + 1.0).abs() < 0.2, "slope {slope}");
    }

    #[test]
    fn noise_free_trial_is_pure_sinusoid() {
        let cfg = SynthConfig { stimulus_hz: 11.0, noise_uv: 0.0, harmonic_gains: vec![], ..Default::default() };
        let rec = generate_trial(&cfg).unwrap();
        assert_eq!(rec.channel_ids().collect::<Vec<_>>(), CHANNEL_IDS);
        let o1 = rec.channel("o1").unwrap();
        assert_eq!(o1, rec.channel("o2").unwrap());
        let spec = dft_magnitude(o1, 250.0, spectral::default_pad(o1.len())).unwrap();
        assert!((peak_frequency(&spec, 6.0, 14.0).unwrap() - 11.0).abs() <= spec.resolution());
        let ear = rec.channel("ear").unwrap();
        assert!(ear.iter().zip(o1).all(|(e, o)| (e - 0.8 * o).abs() < 1e-12));
    }

    #[test]
    fn trials_deterministic_and_seed_only_changes_noise() {
        let cfg = SynthConfig { seed: 1, ..Default::default() };
        assert_eq!(generate_trial(&cfg).unwrap(), generate_trial(&cfg).unwrap());
        let other = generate_trial(&SynthConfig { seed: 2, ..cfg.clone() }).unwrap();
        let clean = generate_trial(&SynthConfig { noise_uv: 0.0, ..cfg.clone() }).unwrap();
        let a = generate_trial(&cfg).unwrap();
        assert_ne!(a.channel("o1").unwrap(), other.channel("o1").unwrap());
        // subtracting the noise-free run isolates noise matching a direct draw
        let noise = pink_noise(cfg.n_samples(), cfg.fs, cfg.noise_uv, derive_seed(1, 0)).unwrap();
        for ((x, c), e) in a.channel("o1").unwrap().iter().zip(clean.channel("o1").unwrap()).zip(&noise) {
            assert!((x - c - e).abs() < 1e-9);
        }
    }

    #[test]
    fn residual_noise_uncorrelated_with_signal() {
        let base = SynthConfig::default();
        let signal = base.deterministic_component();
        for seed in 0..20 {
            let cfg = SynthConfig { seed, ..base.clone() };
            let rec = generate_trial(&cfg).unwrap();
            let residual: Vec<f64> = rec.channel("o1").unwrap().iter().zip(&signal).map(|(x, s)| x - s).collect();
            let r = crate::stats::pearson_r(&residual, &signal).unwrap().r;
            assert!(r.abs() < 0.05, "seed {seed}: r = {r}");
        }
    }

    #[test]
    fn top_decade_carries_negligible_signal() {
        let cfg = SynthConfig { stimulus_hz: 13.0, noise_uv: 0.0, ..Default::default() };
        let x = cfg.deterministic_component();
        let spec = dft_magnitude(&x, cfg.fs, x.len()).unwrap();
        let total: f64 = spec.magnitudes.iter().map(|m| m * m).sum();
        let top: f64 = spec.freqs.iter().zip(&spec.magnitudes).filter(|(f, _)| **f >= 112.5).map(|(_, m)| m * m).sum();
        assert!(top < 0.01 * total);
    }

    #[test]
    fn aliasing_rejected() {
        let cfg = SynthConfig { stimulus_hz: 60.0, harmonic_gains: vec![0.3, 0.1], ..Default::default() };
        assert!(matches!(generate_trial(&cfg), Err(SynthError::AliasingConfig { .. })));
    }

    #[test]
    fn session_shapes() {
        let cfg = SessionConfig::default();
        let plan = cfg.plan().unwrap();
        assert_eq!(plan.len(), 100);
        assert_eq!(plan[0].spec.trial_id, "p1_f7_t1");
        let small = SessionConfig { trials_per_freq: 1, participants: 1, ..Default::default() };
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_session(&small, dir.path()).unwrap();
        assert_eq!(manifest.trials.len(), 4);
        assert!(dir.path().join("manifest.csv").exists());
        assert!(dir.path().join("p1_f13_t1.csv").exists());
    }
}
