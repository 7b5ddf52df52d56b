use std::fs;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("ssvep").chain(args.iter().copied());
    let code = ssvep_cli::run_with(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn small_session(dir: &Path, duration: &str) {
    let (code, _, err) = run(&["synth", "--participants", "1", "--trials", "1", "--duration", duration, "--seed", "3", "--out", p(dir)]);
    assert_eq!(code, 0, "{err}");
}

#[test]
fn unknown_flag_is_usage_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_ssvep")).args(["analyze", "--no-such-flag"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn missing_manifest_is_usage_error() {
    assert_eq!(run(&["correlate"]).0, 2);
}

#[test]
fn small_synth_writes_four_trials() {
    let dir = tempfile::tempdir().unwrap();
    small_session(dir.path(), "4");
    let manifest = fs::read_to_string(dir.path().join("manifest.csv")).unwrap();
    assert_eq!(manifest.lines().count(), 5);
    assert!(manifest.starts_with("trial_id,participant,stimulus_hz,file,start_s,duration_s"));
}

#[test]
fn default_session_report_has_forty_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(run(&["synth", "--seed", "42", "--out", p(d)]).0, 0);
    let report = d.join("table1.csv");
    let (code, _, err) = run(&["analyze", "--manifest", p(&d.join("manifest.csv")), "--report", p(&report)]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(report).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 40);
    assert_eq!(rows[0].split(',').take(3).collect::<Vec<_>>(), ["p1", "7", "occipital"]);
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let bin = env!("CARGO_BIN_EXE_ssvep");
    let common = ["synth", "--participants", "1", "--trials", "1", "--duration", "2"];
    let st = Command::new(bin).args(common).args(["--out", p(&a)]).env("SSVEP_SEED", "77").status().unwrap();
    assert!(st.success());
    let st = Command::new(bin).args(common).args(["--seed", "77", "--out", p(&b)]).env_remove("SSVEP_SEED").status().unwrap();
    assert!(st.success());
    let f = "p1_f9_t1.csv";
    assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
}

#[test]
fn dump_config_golden() {
    let (code, out, _) = run(&["analyze", "--dump-config"]);
    assert_eq!(code, 0);
    let golden = r#"{
  "sample_rate": 250.0,
  "stimulus_set": [
    7.0,
    9.0,
    11.0,
    13.0
  ],
  "channel_roles": {
    "occipital": [
      "o1",
      "o2"
    ],
    "ear": "ear"
  },
  "analysis": {
    "filter": {
      "order": 4,
      "pass_lo": 6.0,
      "pass_hi": 14.0,
      "stop_lo": 5.0,
      "stop_hi": 15.0,
      "ripple_db": 1.0,
      "atten_db": null,
      "fs": 250.0
    },
    "zero_phase": false,
    "analysis_band": [
      6.0,
      14.0
    ],
    "segment_s": 1.0,
    "pad_factor": 8,
    "local_peak_hz": null
  }
}
"#;
    assert_eq!(out, golden);
}

#[test]
fn filter_coefficients_and_infeasible_attenuation() {
    let (code, out, _) = run(&["filter"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "section,b0,b1,b2,a1,a2");
    assert_eq!(lines.len(), 3);
    let (code, _, err) = run(&["filter", "--atten-db", "40"]);
    assert_eq!(code, 1);
    assert!(err.contains("40"), "{err}");
}

#[test]
fn filter_recording_keeps_layout() {
    let dir = tempfile::tempdir().unwrap();
    small_session(dir.path(), "2");
    let out = dir.path().join("filtered.csv");
    let input = dir.path().join("p1_f7_t1.csv");
    assert_eq!(run(&["filter", "--input", p(&input), "--output", p(&out), "--zero-phase"]).0, 0);
    let text = fs::read_to_string(out).unwrap();
    assert_eq!(text.lines().next(), Some("o1_uV,o2_uV,ear_uV"));
    assert_eq!(text.lines().count(), 501);
}

#[test]
fn waveform_and_spectrogram_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_session(d, "15");
    let m = d.join("manifest.csv");
    let (wf, sp) = (d.join("wf.csv"), d.join("sp.csv"));
    let (code, _, err) = run(&["report", "--manifest", p(&m), "--trial", "p1_f7_t1", "--waveform", p(&wf), "--spectrogram", p(&sp), "--svg"]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&wf).unwrap();
    assert_eq!(text.lines().next(), Some("t_s,o1_uV,o2_uV,ear_uV"));
    assert_eq!(text.lines().count(), 251);
    assert!(fs::read_to_string(d.join("wf.svg")).unwrap().starts_with("<svg"));
    let spec = fs::read_to_string(&sp).unwrap();
    assert_eq!(spec.lines().next(), Some("time_s,freq_hz,power"));
    // 29 frames x 36 bins (5..=40 Hz at 1 Hz resolution)
    assert_eq!(spec.lines().count(), 1 + 29 * 36);
}

#[test]
fn empty_session_boxplot_is_missing_analysis() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("manifest.csv");
    fs::write(&m, "trial_id,participant,stimulus_hz,file,start_s,duration_s\n").unwrap();
    let (code, _, err) = run(&["report", "--manifest", p(&m), "--boxplot", p(&dir.path().join("b.csv"))]);
    assert_eq!(code, 1);
    assert!(err.contains("missing analysis"), "{err}");
    let (code, out, _) = run(&["correlate", "--manifest", p(&m)]);
    assert_eq!(code, 0);
    assert_eq!(out, "stimulus_hz,r,p,n\n");
}

#[test]
fn scatter_rows_match_segments() {
    let dir = tempfile::tempdir().unwrap();
    small_session(dir.path(), "10");
    let sc = dir.path().join("sc.csv");
    assert_eq!(run(&["report", "--manifest", p(&dir.path().join("manifest.csv")), "--scatter", p(&sc)]).0, 0);
    // 4 trials x 10 one-second segments
    assert_eq!(fs::read_to_string(sc).unwrap().lines().count(), 41);
}

#[test]
fn stream_matches_classify() {
    let dir = tempfile::tempdir().unwrap();
    small_session(dir.path(), "30");
    let m = dir.path().join("manifest.csv");
    let (code, streamed, _) = run(&["stream", "--manifest", p(&m), "--trial", "p1_f9_t1"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = streamed.lines().collect();
    assert_eq!(lines[0], "t_start,chosen_hz,score_7,score_9,score_11,score_13,margin_db");
    assert_eq!(lines.len(), 30);
    let (code, offline, _) = run(&["classify", "--manifest", p(&m), "--trial", "p1_f9_t1"]);
    assert_eq!(code, 0);
    let stripped: Vec<String> = offline.lines().skip(1).map(|l| l.splitn(3, ',').nth(2).unwrap().to_string()).collect();
    assert_eq!(stripped, lines[1..]);
}

#[test]
fn unknown_trial_is_data_error() {
    let dir = tempfile::tempdir().unwrap();
    small_session(dir.path(), "2");
    let (code, _, err) = run(&["stream", "--manifest", p(&dir.path().join("manifest.csv")), "--trial", "nope"]);
    assert_eq!(code, 1);
    assert!(err.contains("nope"));
}
