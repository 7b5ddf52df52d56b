//! Acceptance criteria 1-10. Each test prints one `criterion N: PASS|FAIL`
//! line straight to stderr (visible even when output is captured).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{Duration, Instant};

use ssvep_core::detector::{replay_stream, stream_detect, Detector, DetectorConfig};
use ssvep_core::filters::{BandpassSpec, FilterCoefficients};
use ssvep_core::model::{ChannelRoles, Session, SessionOptions, DEFAULT_STIMULUS_SET};
use ssvep_core::spectral::{self, bandwidth_3db, dft_magnitude, peak_frequency, snr_db, AnalysisConfig};
use ssvep_core::stats::{amplitude_dataset, pearson_r, permutation_p};
use ssvep_core::synth::{derive_seed, generate_session, generate_trial, SessionConfig, SynthConfig};

fn verdict(n: u32, pass: bool, elapsed: Duration, limit: Duration, detail: &str) {
    let within = elapsed <= limit;
    let ok = pass && within;
    let line = format!(
        "criterion {n}: {} | {detail} | {:.2}s (limit {:.0}s)\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        limit.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(pass, "criterion {n} failed: {detail}");
    assert!(within, "criterion {n} exceeded its runtime limit: {:.2}s", elapsed.as_secs_f64());
}

/// Cascade multiplied out into `B(z)/A(z)` and evaluated by Horner's rule.
fn transfer_function_oracle(f: &FilterCoefficients, hz: f64) -> Complex64 {
    let mut b = vec![1.0];
    let mut a = vec![1.0];
    let conv = |p: &[f64], q: [f64; 3]| -> Vec<f64> {
        let mut r = vec![0.0; p.len() + 2];
        for (i, pi) in p.iter().enumerate() {
            for (j, qj) in q.iter().enumerate() {
                r[i + j] += pi * qj;
            }
        }
        r
    };
    for s in &f.sections {
        b = conv(&b, [s.b0, s.b1, s.b2]);
        a = conv(&a, [1.0, s.a1, s.a2]);
    }
    let zinv = Complex64::from_polar(1.0, -2.0 * PI * hz / f.sample_rate);
    let horner = |c: &[f64]| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, v| acc * zinv + v);
    horner(&b) / horner(&a)
}

#[test]
fn criterion_01_filter_spec_compliance() {
    let t0 = Instant::now();
    let spec = BandpassSpec::paper();
    let (pass, detail) = match spec.design() {
        Err(e) => (false, format!("design failed: {e}")),
        Ok(f) => {
            let fs = spec.fs;
            let mut worst_pass: f64 = 0.0;
            let mut worst_stop = f64::NEG_INFINITY;
            for k in 0..1024 {
                let hz = k as f64 * (fs / 2.0) / 1023.0;
                let db = 20.0 * transfer_function_oracle(&f, hz).norm().log10();
                if (6.0..=14.0).contains(&hz) {
                    worst_pass = worst_pass.max(db.abs());
                }
                if !(5.0..=15.0).contains(&hz) {
                    worst_stop = worst_stop.max(db);
                }
            }
            (
                worst_pass <= 1.0 && worst_stop <= -40.0,
                format!("order 4: max passband deviation {worst_pass:.3} dB (need <= 1), max stopband gain {worst_stop:.3} dB (need <= -40)"),
            )
        }
    };
    verdict(1, pass, t0.elapsed(), Duration::from_secs(1), &detail);
}

#[test]
fn criterion_02_synthetic_claims() {
    let t0 = Instant::now();
    let cfg = AnalysisConfig::default();
    let roles = ChannelRoles::default();
    let (mut total, mut ok) = (0, 0);
    let (mut worst_peak, mut min_snr, mut max_bw) = (0.0f64, f64::INFINITY, 0.0f64);
    for seed in 0..10 {
        for &hz in &DEFAULT_STIMULUS_SET {
            let rec = generate_trial(&SynthConfig { stimulus_hz: hz, seed, ..Default::default() }).unwrap();
            let m = spectral::trial_metrics(&rec, &roles, &DEFAULT_STIMULUS_SET, hz, &cfg).unwrap();
            for r in [m.occipital, m.ear] {
                total += 1;
                worst_peak = worst_peak.max((r.peak_hz - hz).abs());
                min_snr = min_snr.min(r.snr_db);
                max_bw = max_bw.max(r.bandwidth_hz);
                if (r.peak_hz - hz).abs() <= 0.5 && r.snr_db > 0.0 && r.bandwidth_hz < 1.0 {
                    ok += 1;
                }
            }
        }
    }
    let detail = format!(
        "{ok}/{total} trial-roles pass; worst peak error {worst_peak:.4} Hz, min SNR {min_snr:.2} dB, max bandwidth {max_bw:.4} Hz"
    );
    verdict(2, ok == total, t0.elapsed(), Duration::from_secs(60), &detail);
}

#[test]
fn criterion_03_snr_exactness() {
    let t0 = Instant::now();
    let a = snr_db(&[(7.0, 10.0), (9.0, 1.0), (11.0, 1.0), (13.0, 1.0)], 7.0).unwrap();
    let b = snr_db(&[(7.0, 4.0), (9.0, 4.0), (11.0, 4.0), (13.0, 4.0)], 11.0).unwrap();
    let pass = (a - 20.0).abs() <= 1e-12 && b.abs() <= 1e-12;
    verdict(3, pass, t0.elapsed(), Duration::from_secs(1), &format!("{{10,1,1,1}} -> {a} dB, all-equal -> {b} dB"));
}

#[test]
fn criterion_04_dft_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.random_range(1..=1024usize);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let spec = dft_magnitude(&x, 250.0, n).unwrap();
        let naive: Vec<f64> = (0..=n / 2)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (k * t % n) as f64 / n as f64))
                    .sum::<Complex64>()
                    .norm()
            })
            .collect();
        let scale = naive.iter().copied().fold(f64::MIN_POSITIVE, f64::max);
        let err = spec.magnitudes.iter().zip(&naive).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
        worst = worst.max(err);
    }
    verdict(4, worst <= 1e-6, t0.elapsed(), Duration::from_secs(30), &format!("worst error relative to spectrum peak {worst:.2e} over 50 inputs"));
}

#[test]
fn criterion_05_correlation_machinery() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst_p: f64 = 0.0;
    let mut worst_affine: f64 = 0.0;
    for i in 0..50 {
        let rho = rng.random_range(0.0..0.5);
        let x: Vec<f64> = (0..50).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y: Vec<f64> = x.iter().map(|v| rho * v + rng.random_range(-1.0..1.0)).collect();
        let c = pearson_r(&x, &y).unwrap();
        let oracle = permutation_p(&x, &y, 100_000, 500 + i).unwrap();
        worst_p = worst_p.max((c.p_two_sided - oracle).abs());
        let (a, b) = (rng.random_range(0.1..10.0), rng.random_range(-5.0..5.0));
        let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        worst_affine = worst_affine.max((pearson_r(&xt, &y).unwrap().r - c.r).abs());
    }
    let pass = worst_p <= 0.02 && worst_affine <= 1e-12;
    let detail = format!("max |p_t - p_perm| {worst_p:.4} (need <= 0.02), max affine r change {worst_affine:.1e}");
    verdict(5, pass, t0.elapsed(), Duration::from_secs(120), &detail);
}

#[test]
fn criterion_06_end_to_end_correlation() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    generate_session(&SessionConfig::default(), dir.path()).unwrap();
    let session = Session::load(dir.path().join("manifest.csv"), &SessionOptions::default()).unwrap();
    let ds = amplitude_dataset(&session, &AnalysisConfig::default()).unwrap();
    let rs: Vec<(f64, f64)> = ds.frequencies.iter().map(|f| (f.stimulus_hz, pearson_r(&f.occipital, &f.ear).unwrap().r)).collect();
    let pass = rs.len() == 4 && rs.iter().all(|(_, r)| *r > 0.5);
    let detail = rs.iter().map(|(hz, r)| format!("{hz} Hz r={r:.3}")).collect::<Vec<_>>().join(", ");
    verdict(6, pass, t0.elapsed(), Duration::from_secs(120), &detail);
}

#[test]
fn criterion_07_offline_online_equivalence() {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = DetectorConfig::default();
    let det = Detector::new(cfg.clone(), 250.0).unwrap();
    let (mut identical, mut windows) = (0, 0);
    for _ in 0..20 {
        let hz = DEFAULT_STIMULUS_SET[rng.random_range(0..4)];
        let rec = generate_trial(&SynthConfig { stimulus_hz: hz, seed: rng.random(), ..Default::default() }).unwrap();
        let streamed = stream_detect(replay_stream(&rec, "ear", false).unwrap(), 250.0, &cfg).unwrap();
        let offline = det.classify_windows(rec.channel("ear").unwrap()).unwrap();
        windows += offline.len();
        let same = streamed.len() == offline.len()
            && streamed.iter().zip(&offline).all(|(a, b)| {
                a.window_start_s.to_bits() == b.window_start_s.to_bits()
                    && a.chosen_hz.map(f64::to_bits) == b.chosen_hz.map(f64::to_bits)
                    && a.confidence_db.to_bits() == b.confidence_db.to_bits()
                    && a.scores.iter().zip(&b.scores).all(|(s, t)| s.0.to_bits() == t.0.to_bits() && s.1.to_bits() == t.1.to_bits())
            });
        identical += usize::from(same);
    }
    verdict(7, identical == 20, t0.elapsed(), Duration::from_secs(30), &format!("{identical}/20 trials bit-identical ({windows} windows)"));
}

#[test]
fn criterion_08_detector_accuracy() {
    let t0 = Instant::now();
    let det = Detector::new(DetectorConfig::default(), 250.0).unwrap();
    let mut per_freq = Vec::new();
    for (fi, &hz) in DEFAULT_STIMULUS_SET.iter().enumerate() {
        let correct = (0..100u64)
            .filter(|i| {
                let cfg = SynthConfig { stimulus_hz: hz, duration_s: 2.0, seed: derive_seed(5, fi as u64 * 100 + i), ..Default::default() };
                let rec = generate_trial(&cfg).unwrap();
                det.classify(rec.channel("ear").unwrap(), 0.0).unwrap().chosen_hz == Some(hz)
            })
            .count();
        per_freq.push((hz, correct));
    }
    let pass = per_freq.iter().all(|(_, c)| *c >= 95);
    let detail = per_freq.iter().map(|(hz, c)| format!("{hz} Hz {c}/100")).collect::<Vec<_>>().join(", ");
    verdict(8, pass, t0.elapsed(), Duration::from_secs(60), &detail);
}

fn workflow(dir: &Path) {
    let d = dir.to_str().unwrap();
    let m = format!("{d}/manifest.csv");
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--seed".into(), "42".into(), "--out".into(), d.into()],
        vec!["analyze".into(), "--manifest".into(), m.clone(), "--report".into(), format!("{d}/table1.csv")],
        vec!["correlate".into(), "--manifest".into(), m.clone(), "--out".into(), format!("{d}/table2.csv")],
        vec![
            "report".into(),
            "--manifest".into(),
            m,
            "--boxplot".into(),
            format!("{d}/box.csv"),
            "--scatter".into(),
            format!("{d}/scatter.csv"),
            "--waveform".into(),
            format!("{d}/waveform.csv"),
            "--spectrogram".into(),
            format!("{d}/spectrogram.csv"),
            "--svg".into(),
        ],
    ];
    for step in steps {
        let mut sink = Vec::new();
        let mut err = Vec::new();
        let code = ssvep_cli::run_with(std::iter::once("ssvep".to_string()).chain(step.clone()), &mut sink, &mut err);
        assert_eq!(code, 0, "{step:?}: {}", String::from_utf8_lossy(&err));
    }
}

#[test]
fn criterion_09_determinism() {
    let t0 = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    workflow(a.path());
    workflow(b.path());
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    let differing: Vec<String> = names
        .iter()
        .filter(|n| fs::read(a.path().join(n)).unwrap() != fs::read(b.path().join(n)).ok().unwrap_or_default())
        .map(|n| n.to_string_lossy().into_owned())
        .collect();
    let same_listing = fs::read_dir(b.path()).unwrap().count() == names.len();
    let pass = differing.is_empty() && same_listing;
    verdict(9, pass, t0.elapsed(), Duration::from_secs(120), &format!("{} files compared, differing: {differing:?}", names.len()));
}

/// Half-power crossings of the windowed tone's DTFT, by bisection on a dense direct evaluation.
fn dense_dft_width(x: &[f64], fs: f64, f0: f64) -> f64 {
    let power = |f: f64| {
        x.iter().enumerate().map(|(t, v)| v * Complex64::from_polar(1.0, -2.0 * PI * f * t as f64 / fs)).sum::<Complex64>().norm_sqr()
    };
    let peak = power(f0);
    let crossing = |mut inside: f64, mut outside: f64| {
        for _ in 0..60 {
            let mid = 0.5 * (inside + outside);
            if power(mid) >= peak / 2.0 {
                inside = mid;
            } else {
                outside = mid;
            }
        }
        0.5 * (inside + outside)
    };
    let t = x.len() as f64 / fs;
    crossing(f0, f0 + 1.0 / t) - crossing(f0, f0 - 1.0 / t)
}

#[test]
fn criterion_10_bandwidth_oracle() {
    let t0 = Instant::now();
    let (fs, f0, secs) = (250.0, 10.0, 30.0);
    let x: Vec<f64> = (0..(fs * secs) as usize).map(|i| (2.0 * PI * f0 * i as f64 / fs).sin()).collect();
    let spec = dft_magnitude(&x, fs, spectral::default_pad(x.len())).unwrap();
    let peak = peak_frequency(&spec, 6.0, 14.0).unwrap();
    let measured = bandwidth_3db(&spec, peak).unwrap().width_hz;
    let oracle = dense_dft_width(&x, fs, f0);
    let target = 0.886 / secs;
    let pass = (measured - target).abs() <= 0.1 * target && (oracle - target).abs() <= 0.1 * target;
    let detail = format!("measured {measured:.5} Hz, dense-DFT oracle {oracle:.5} Hz, 0.886/T = {target:.5} Hz");
    verdict(10, pass, t0.elapsed(), Duration::from_secs(5), &detail);
}
