use rayon::prelude::*;
use serde::Serialize;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ssvep_core::detector::{replay_stream, Decision, Detector, DetectorConfig, StreamDetector};
use ssvep_core::filters::{self, BandpassSpec, FilterCoefficients};
use ssvep_core::model::{self, ChannelRole, ChannelRoles, Recording, Session, SessionOptions, TrialSpec};
use ssvep_core::spectral::{self, AnalysisConfig, SpectrogramGrid, TrialMetrics};
use ssvep_core::stats::{self, AmplitudeDataset, SegmentAmplitudes};
use ssvep_core::synth::{self, SessionConfig, SynthConfig};

use crate::{svg, AnalyzeArgs, CliError, Command, CorrelateArgs, DetectArgs, DetectOpts, FilterArgs, FilterOpts, ReportArgs, SpectrogramArgs, StreamArgs, SynthArgs};

type Result<T> = std::result::Result<T, CliError>;

pub fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    match cmd {
        Command::Synth(a) => synth_cmd(a, err),
        Command::Filter(a) => filter_cmd(a, out, err),
        Command::Analyze(a) => analyze_cmd(a, out),
        Command::Spectrogram(a) => spectrogram_cmd(a, out),
        Command::Correlate(a) => correlate_cmd(a, out),
        Command::Report(a) => report_cmd(a),
        Command::Classify(a) => classify_cmd(a, out, err),
        Command::Stream(a) => stream_cmd(a, out),
    }
}

fn num(v: f64) -> String {
    model::format_sample(v)
}

fn hz_label(hz: f64) -> String {
    format!("{hz}")
}

/// Write to `path`, or to `out` when no path is given.
fn emit(path: Option<&Path>, out: &mut dyn Write, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match path {
        Some(p) => {
            let file = File::create(p).map_err(|e| CliError::Data(format!("cannot create {}: {e}", p.display())))?;
            let mut w = BufWriter::new(file);
            body(&mut w)?;
            w.flush()?;
        }
        None => {
            body(out)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn write_rows(w: &mut dyn Write, header: &[String], rows: &[Vec<String>]) -> io::Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}

fn headers(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn svg_path(csv: &Path) -> PathBuf {
    csv.with_extension("svg")
}

fn load_session(opts: &crate::SessionOpts) -> Result<(Session, SessionOptions)> {
    let options = opts.options();
    let session = Session::load(opts.manifest()?, &options)?;
    Ok((session, options))
}

fn find_trial<'a>(session: &'a Session, id: Option<&str>) -> Result<(&'a TrialSpec, &'a Recording)> {
    match id {
        Some(id) => session.trial(id).ok_or_else(|| CliError::Data(format!("unknown trial {id:?}"))),
        None => session.iter().next().ok_or_else(|| CliError::MissingAnalysis("session has no trials".into())),
    }
}

fn synth_cmd(a: SynthArgs, err: &mut dyn Write) -> Result<()> {
    let harmonic_gains = a
        .harmonics
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("bad harmonic gain {s:?}"))))
        .collect::<Result<Vec<_>>>()?;
    let cfg = SessionConfig {
        stimulus_set: a.freqs,
        trials_per_freq: a.trials,
        participants: a.participants,
        base: SynthConfig {
            duration_s: a.duration,
            fs: a.fs,
            fundamental_uv: a.fundamental_uv,
            harmonic_gains,
            noise_uv: a.noise_uv,
            ear_attenuation: a.ear_attenuation,
            ..SynthConfig::default()
        },
        seed: a.seed,
        gain_spread: a.gain_spread,
    };
    let plan = cfg.plan()?;
    fs::create_dir_all(&a.out).map_err(|e| CliError::Data(format!("cannot create {}: {e}", a.out.display())))?;
    plan.par_iter().try_for_each(|t| -> Result<()> {
        model::write_recording(&synth::generate_trial(&t.config)?, a.out.join(&t.file))?;
        Ok(())
    })?;
    cfg.manifest(&plan).write(a.out.join("manifest.csv"))?;
    writeln!(err, "wrote {} trials to {}", plan.len(), a.out.display())?;
    Ok(())
}

fn filter_cmd(a: FilterArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let coeffs = a.filter.spec(a.fs).design()?;
    if let Some(d) = &coeffs.design {
        writeln!(
            err,
            "elliptic bandpass order {}: pass {}-{} Hz, stop {}-{} Hz, stopband attenuation {:.3} dB",
            d.order, d.passband_hz.0, d.passband_hz.1, d.stopband_hz.0, d.stopband_hz.1, d.stopband_atten_db
        )?;
    }
    if let Some(path) = &a.response {
        let freqs: Vec<f64> = (0..1024).map(|k| k as f64 * (a.fs / 2.0) / 1023.0).collect();
        let h = filters::frequency_response(&coeffs, &freqs)?;
        let rows: Vec<Vec<String>> = freqs
            .iter()
            .zip(&h)
            .map(|(f, h)| vec![num(*f), num(20.0 * h.norm().log10()), num(h.arg())])
            .collect();
        emit(Some(path), out, |w| write_rows(w, &headers(&["freq_hz", "gain_db", "phase_rad"]), &rows))?;
    }
    match &a.input {
        Some(input) => {
            let rec = model::load_recording(input, a.fs)?;
            let channels = rec
                .channels()
                .iter()
                .map(|c| Ok(model::Channel { id: c.id.clone(), samples: run_filter(&coeffs, a.filter.zero_phase, &c.samples)? }))
                .collect::<Result<Vec<_>>>()?;
            let filtered = Recording::new(a.fs, channels)?;
            emit(a.output.as_deref(), out, |w| model::write_recording_to(&filtered, w))
        }
        None => {
            let rows: Vec<Vec<String>> = coeffs
                .sections
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut row = vec![i.to_string()];
                    row.extend([s.b0, s.b1, s.b2, s.a1, s.a2].iter().map(|v| format!("{v:e}")));
                    row
                })
                .collect();
            emit(a.output.as_deref(), out, |w| write_rows(w, &headers(&["section", "b0", "b1", "b2", "a1", "a2"]), &rows))
        }
    }
}

fn run_filter(f: &FilterCoefficients, zero_phase: bool, x: &[f64]) -> Result<Vec<f64>> {
    Ok(if zero_phase { filters::apply_filter_zero_phase(f, x)? } else { filters::apply_filter(f, x) })
}

#[derive(Serialize)]
struct EffectiveConfig<'a> {
    sample_rate: f64,
    stimulus_set: &'a [f64],
    channel_roles: &'a ChannelRoles,
    analysis: &'a AnalysisConfig,
}

fn analyze_cmd(a: AnalyzeArgs, out: &mut dyn Write) -> Result<()> {
    let options = a.session.options();
    let cfg = a.analysis.config(options.sample_rate);
    if a.dump_config {
        let dump = EffectiveConfig {
            sample_rate: options.sample_rate,
            stimulus_set: &options.stimulus_set,
            channel_roles: &options.channel_roles,
            analysis: &cfg,
        };
        writeln!(out, "{}", serde_json::to_string_pretty(&dump)?)?;
        return Ok(());
    }
    let session = Session::load(a.session.manifest()?, &options)?;
    let filter = cfg.design_filter(options.sample_rate)?;
    let roles = &session.manifest.channel_roles;
    let set = &session.manifest.stimulus_set;
    let metrics: Vec<TrialMetrics> = session
        .manifest
        .trials
        .par_iter()
        .zip(&session.trials)
        .map(|(t, rec)| spectral::trial_metrics_with(rec, roles, set, t.spec.stimulus_hz, &cfg, &filter))
        .collect::<std::result::Result<_, _>>()?;

    let roles_order = [ChannelRole::Occipital, ChannelRole::Ear];
    if let Some(path) = &a.trials_out {
        let mut rows = Vec::new();
        for ((spec, _), m) in session.iter().zip(&metrics) {
            for role in roles_order {
                let r = m.get(role);
                rows.push(vec![
                    spec.trial_id.clone(),
                    spec.participant.clone(),
                    hz_label(spec.stimulus_hz),
                    role.as_str().to_string(),
                    num(r.peak_hz),
                    num(r.snr_db),
                    num(r.bandwidth_hz),
                    u8::from(r.bandwidth_clipped).to_string(),
                ]);
            }
        }
        let header = headers(&["trial_id", "participant", "stimulus_hz", "role", "peak_hz", "snr_db", "bandwidth_hz", "bandwidth_clipped"]);
        emit(Some(path), out, |w| write_rows(w, &header, &rows))?;
    }

    let mut participants: Vec<&str> = Vec::new();
    for (spec, _) in session.iter() {
        if !participants.contains(&spec.participant.as_str()) {
            participants.push(&spec.participant);
        }
    }
    let mut rows = Vec::new();
    for p in &participants {
        for &hz in set {
            let group: Vec<&TrialMetrics> = session
                .iter()
                .zip(&metrics)
                .filter(|((s, _), _)| s.participant == *p && (s.stimulus_hz - hz).abs() < 1e-9)
                .map(|(_, m)| m)
                .collect();
            if group.is_empty() {
                continue;
            }
            let n = group.len() as f64;
            for role in roles_order {
                let mean = |f: &dyn Fn(&TrialMetrics) -> f64| group.iter().map(|m| f(m)).sum::<f64>() / n;
                rows.push(vec![
                    p.to_string(),
                    hz_label(hz),
                    role.as_str().to_string(),
                    num(mean(&|m| m.get(role).peak_hz)),
                    num(mean(&|m| m.get(role).snr_db)),
                    num(mean(&|m| m.get(role).bandwidth_hz)),
                    group.len().to_string(),
                    group.iter().filter(|m| m.get(role).bandwidth_clipped).count().to_string(),
                ]);
            }
        }
    }
    let header = headers(&["participant", "stimulus_hz", "role", "peak_hz", "snr_db", "bandwidth_hz", "n_trials", "n_clipped"]);
    emit(a.report.as_deref(), out, |w| write_rows(w, &header, &rows))
}

fn role_or_channel(rec: &Recording, roles: &ChannelRoles, channel: &str) -> Result<Vec<f64>> {
    if channel == "occipital" {
        Ok(model::average_channels(rec, &roles.occipital_ids())?)
    } else {
        Ok(rec.channel(channel)?.to_vec())
    }
}

fn spectrogram_csv(w: &mut dyn Write, g: &SpectrogramGrid) -> io::Result<()> {
    writeln!(w, "time_s,freq_hz,power")?;
    for (t, row) in g.times.iter().zip(&g.power) {
        for (f, p) in g.freqs.iter().zip(row) {
            writeln!(w, "{},{},{}", num(*t), num(*f), num(*p))?;
        }
    }
    Ok(())
}

fn spectrogram_cmd(a: SpectrogramArgs, out: &mut dyn Write) -> Result<()> {
    if a.svg && a.out.is_none() {
        return Err(CliError::Usage("--svg needs --out".into()));
    }
    let (session, options) = load_session(&a.session)?;
    let (_, rec) = find_trial(&session, Some(&a.trial))?;
    let x = role_or_channel(rec, &session.manifest.channel_roles, &a.channel)?;
    let grid = spectral::spectrogram(&x, options.sample_rate, a.window, a.overlap, a.band.0, a.band.1)?;
    emit(a.out.as_deref(), out, |w| spectrogram_csv(w, &grid))?;
    if let (true, Some(path)) = (a.svg, &a.out) {
        fs::write(svg_path(path), svg::heatmap(&grid, &format!("{} {}", a.trial, a.channel)))?;
    }
    Ok(())
}

fn dataset(session: &Session, cfg: &AnalysisConfig) -> Result<AmplitudeDataset> {
    if session.trials.is_empty() {
        return Ok(AmplitudeDataset::default());
    }
    let filter = cfg.design_filter(session.trials[0].sample_rate())?;
    let roles = &session.manifest.channel_roles;
    let trials: Vec<SegmentAmplitudes> = session
        .manifest
        .trials
        .par_iter()
        .zip(&session.trials)
        .map(|(t, rec)| {
            let (occipital, ear) = stats::segment_amplitudes(rec, roles, &filter, cfg)?;
            Ok(SegmentAmplitudes { participant: t.spec.participant.clone(), stimulus_hz: t.spec.stimulus_hz, occipital, ear })
        })
        .collect::<std::result::Result<_, stats::StatsError>>()?;
    Ok(stats::assemble_dataset(&session.manifest.stimulus_set, &trials)?)
}

fn correlate_cmd(a: CorrelateArgs, out: &mut dyn Write) -> Result<()> {
    let (session, options) = load_session(&a.session)?;
    let ds = dataset(&session, &a.analysis.config(options.sample_rate))?;
    let rows = ds
        .frequencies
        .iter()
        .map(|f| {
            let c = stats::pearson_r(&f.occipital, &f.ear)?;
            Ok(vec![hz_label(f.stimulus_hz), num(c.r), num(c.p_two_sided), c.n.to_string()])
        })
        .collect::<Result<Vec<_>>>()?;
    emit(a.out.as_deref(), out, |w| write_rows(w, &headers(&["stimulus_hz", "r", "p", "n"]), &rows))
}

fn report_cmd(a: ReportArgs) -> Result<()> {
    if a.boxplot.is_none() && a.scatter.is_none() && a.waveform.is_none() && a.spectrogram.is_none() {
        return Err(CliError::Usage("report needs at least one of --boxplot, --scatter, --waveform, --spectrogram".into()));
    }
    let (session, options) = load_session(&a.session)?;
    let fs = options.sample_rate;
    let cfg = a.analysis.config(fs);
    let mut sink = io::sink();

    if a.boxplot.is_some() || a.scatter.is_some() {
        let ds = dataset(&session, &cfg)?;
        if ds.is_empty() {
            return Err(CliError::MissingAnalysis("no segment amplitudes in the session".into()));
        }
        if let Some(path) = &a.boxplot {
            let mut rows = Vec::new();
            let mut boxes = Vec::new();
            for f in &ds.frequencies {
                for (role, values) in [(ChannelRole::Occipital, &f.occipital), (ChannelRole::Ear, &f.ear)] {
                    let b = stats::box_stats(values)?;
                    rows.push(vec![
                        hz_label(f.stimulus_hz),
                        role.as_str().to_string(),
                        values.len().to_string(),
                        num(b.min),
                        num(b.q1),
                        num(b.median),
                        num(b.q3),
                        num(b.max),
                        num(b.whisker_lo),
                        num(b.whisker_hi),
                        b.outliers.len().to_string(),
                    ]);
                    boxes.push((format!("{} Hz {}", hz_label(f.stimulus_hz), role.as_str()), b));
                }
            }
            let header = headers(&["stimulus_hz", "role", "n", "min", "q1", "median", "q3", "max", "whisker_lo", "whisker_hi", "n_outliers"]);
            emit(Some(path), &mut sink, |w| write_rows(w, &header, &rows))?;
            if a.svg {
                fs::write(svg_path(path), svg::boxplot(&boxes))?;
            }
        }
        if let Some(path) = &a.scatter {
            let rows: Vec<Vec<String>> = ds
                .frequencies
                .iter()
                .flat_map(|f| f.occipital.iter().zip(&f.ear).map(move |(o, e)| vec![hz_label(f.stimulus_hz), num(*o), num(*e)]))
                .collect();
            emit(Some(path), &mut sink, |w| write_rows(w, &headers(&["stimulus_hz", "occipital_amp", "ear_amp"]), &rows))?;
            if a.svg {
                fs::write(svg_path(path), svg::scatter(&ds))?;
            }
        }
    }

    if let Some(path) = &a.waveform {
        let (spec, rec) = find_trial(&session, a.trial.as_deref())?;
        let display = BandpassSpec::display().with_fs(fs).design()?;
        let start = model::seconds_to_samples(a.excerpt_start, fs);
        let len = model::seconds_to_samples(1.0, fs);
        if start + len > rec.duration_samples() {
            return Err(CliError::Data(format!(
                "excerpt {}-{} s exceeds trial {} ({} s)",
                a.excerpt_start,
                a.excerpt_start + 1.0,
                spec.trial_id,
                rec.duration_s()
            )));
        }
        let mut series = Vec::new();
        for c in rec.channels() {
            let y = run_filter(&display, a.analysis.filter.zero_phase, &c.samples)?;
            series.push((c.id.clone(), y[start..start + len].to_vec()));
        }
        let t: Vec<f64> = (0..len).map(|i| (start + i) as f64 / fs).collect();
        let mut header = vec!["t_s".to_string()];
        header.extend(series.iter().map(|(id, _)| format!("{id}_uV")));
        let rows: Vec<Vec<String>> = (0..len)
            .map(|i| std::iter::once(num(t[i])).chain(series.iter().map(|(_, y)| num(y[i]))).collect())
            .collect();
        emit(Some(path), &mut sink, |w| write_rows(w, &header, &rows))?;
        if a.svg {
            fs::write(svg_path(path), svg::waveform(&t, &series, &spec.trial_id))?;
        }
    }

    if let Some(path) = &a.spectrogram {
        let (spec, rec) = find_trial(&session, a.trial.as_deref())?;
        let x = role_or_channel(rec, &session.manifest.channel_roles, "occipital")?;
        let grid = spectral::spectrogram(&x, fs, 1.0, 0.5, 5.0, 40.0)?;
        emit(Some(path), &mut sink, |w| spectrogram_csv(w, &grid))?;
        if a.svg {
            fs::write(svg_path(path), svg::heatmap(&grid, &format!("{} occipital", spec.trial_id)))?;
        }
    }
    Ok(())
}

fn detector(session: &crate::SessionOpts, filter: &FilterOpts, detect: &DetectOpts) -> Result<Detector> {
    let cfg = DetectorConfig {
        stimulus_set: session.freqs.clone(),
        min_margin_db: detect.margin_db,
        filter: filter.spec(session.fs),
        zero_phase: filter.zero_phase,
        pad_factor: 8,
        window_s: detect.window,
        hop_s: detect.hop,
        channel: detect.channel.clone(),
    };
    Ok(Detector::new(cfg, session.fs)?)
}

fn decision_header(set: &[f64]) -> Vec<String> {
    let mut h = vec!["t_start".to_string(), "chosen_hz".to_string()];
    h.extend(set.iter().map(|f| format!("score_{}", hz_label(*f))));
    h.push("margin_db".into());
    h
}

fn decision_row(d: &Decision) -> Vec<String> {
    let mut row = vec![num(d.window_start_s), d.chosen_hz.map(hz_label).unwrap_or_default()];
    row.extend(d.scores.iter().map(|(_, s)| num(*s)));
    row.push(num(d.confidence_db));
    row
}

fn classify_cmd(a: DetectArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<()> {
    let (session, _) = load_session(&a.session)?;
    let det = detector(&a.session, &a.filter, &a.detect)?;
    let selected: Vec<(&TrialSpec, &Recording)> = match &a.trial {
        Some(id) => vec![find_trial(&session, Some(id))?],
        None => session.iter().collect(),
    };
    let decisions: Vec<Vec<Decision>> = selected
        .par_iter()
        .map(|(_, rec)| det.classify_windows(rec.channel(&a.detect.channel)?))
        .collect::<std::result::Result<_, _>>()?;
    let mut header = vec!["trial_id".to_string(), "stimulus_hz".to_string()];
    header.extend(decision_header(&a.session.freqs));
    let mut rows = Vec::new();
    let (mut correct, mut total) = (0usize, 0usize);
    for ((spec, _), ds) in selected.iter().zip(&decisions) {
        for d in ds {
            total += 1;
            if d.chosen_hz.is_some_and(|c| (c - spec.stimulus_hz).abs() < 1e-9) {
                correct += 1;
            }
            let mut row = vec![spec.trial_id.clone(), hz_label(spec.stimulus_hz)];
            row.extend(decision_row(d));
            rows.push(row);
        }
    }
    emit(a.out.as_deref(), out, |w| write_rows(w, &header, &rows))?;
    if total > 0 {
        writeln!(err, "accuracy {correct}/{total} ({:.1}%)", 100.0 * correct as f64 / total as f64)?;
    }
    Ok(())
}

fn stream_cmd(a: StreamArgs, out: &mut dyn Write) -> Result<()> {
    let (session, _) = load_session(&a.session)?;
    let (_, rec) = find_trial(&session, Some(&a.trial))?;
    let mut det = StreamDetector::new(detector(&a.session, &a.filter, &a.detect)?);
    let mut source = replay_stream(rec, &a.detect.channel, a.realtime)?;
    writeln!(out, "{}", decision_header(&a.session.freqs).join(","))?;
    loop {
        match det.next_decision(&mut source) {
            Ok(d) => {
                writeln!(out, "{}", decision_row(&d).join(","))?;
                out.flush()?;
            }
            Err(ssvep_core::detector::DetectorError::StreamEnded) => return Ok(()),
            Err(e) => return Err(e.into()),
        }
    }
}
