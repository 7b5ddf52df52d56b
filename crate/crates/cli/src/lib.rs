//! The `ssvep` command-line tool.
//!
//! Exit status: 0 on success, 1 on a data error, 2 on a usage error.

use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::PathBuf;
use thiserror::Error;

mod commands;
mod svg;

use ssvep_core::filters::BandpassSpec;
use ssvep_core::model::{self, ChannelRoles, SessionOptions};
use ssvep_core::spectral::AnalysisConfig;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("missing analysis: {0}")]
    MissingAnalysis(String),
    #[error("{0}")]
    Data(String),
    /// The reader of our output went away (e.g. `| head`).
    #[error("output closed")]
    OutputClosed,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::MissingAnalysis(_) | CliError::Data(_) => 1,
            CliError::OutputClosed => 0,
        }
    }
}

macro_rules! data_errors {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Data(e.to_string())
            }
        }
    )*};
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            CliError::OutputClosed
        } else {
            CliError::Data(e.to_string())
        }
    }
}

data_errors!(
    serde_json::Error,
    ssvep_core::model::ModelError,
    ssvep_core::filters::FilterError,
    ssvep_core::spectral::SpectralError,
    ssvep_core::stats::StatsError,
    ssvep_core::synth::SynthError,
    ssvep_core::detector::DetectorError
);

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (lo, hi) = s.split_once(':').ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let lo: f64 = lo.trim().parse().map_err(|_| format!("bad number {lo:?}"))?;
    let hi: f64 = hi.trim().parse().map_err(|_| format!("bad number {hi:?}"))?;
    if !(lo < hi) {
        return Err(format!("range {s:?} must satisfy LO < HI"));
    }
    Ok((lo, hi))
}

#[derive(Debug, Parser)]
#[command(name = "ssvep", version, about = "SSVEP session synthesis, analysis and detection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic session (trial CSVs plus manifest.csv).
    Synth(SynthArgs),
    /// Design the bandpass filter; dump coefficients or filter a recording.
    Filter(FilterArgs),
    /// Per-trial peak frequency, SNR and -3 dB bandwidth, averaged per participant.
    Analyze(AnalyzeArgs),
    /// Short-time power spectrum of one trial as long-format CSV.
    Spectrogram(SpectrogramArgs),
    /// Occipital-vs-ear Pearson correlation of segment amplitudes per frequency.
    Correlate(CorrelateArgs),
    /// Emit plot data (CSV, optionally SVG).
    Report(ReportArgs),
    /// Offline windowed stimulus classification.
    Classify(DetectArgs),
    /// Replay a trial as a sample stream through the sliding-window detector.
    Stream(StreamArgs),
}

/// Bandpass filter parameters.
#[derive(Debug, Clone, Args)]
pub struct FilterOpts {
    /// Bandpass order (twice the lowpass prototype order).
    #[arg(long, default_value_t = 4)]
    pub order: usize,
    /// Passband edges in Hz.
    #[arg(long, value_parser = parse_range, default_value = "6:14")]
    pub pass: (f64, f64),
    /// Stopband edges in Hz.
    #[arg(long, value_parser = parse_range, default_value = "5:15")]
    pub stop: (f64, f64),
    /// Passband ripple in dB.
    #[arg(long, default_value_t = 1.0)]
    pub ripple_db: f64,
    /// Required stopband attenuation; the design fails when the order cannot reach it.
    #[arg(long)]
    pub atten_db: Option<f64>,
    /// Forward-backward filtering instead of causal.
    #[arg(long)]
    pub zero_phase: bool,
}

impl FilterOpts {
    pub fn spec(&self, fs: f64) -> BandpassSpec {
        BandpassSpec {
            order: self.order,
            pass_lo: self.pass.0,
            pass_hi: self.pass.1,
            stop_lo: self.stop.0,
            stop_hi: self.stop.1,
            ripple_db: self.ripple_db,
            atten_db: self.atten_db,
            fs,
        }
    }
}

/// Session layout options.
#[derive(Debug, Clone, Args)]
pub struct SessionOpts {
    /// Session manifest CSV.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Sampling rate of the trial files in Hz.
    #[arg(long, default_value_t = model::DEFAULT_SAMPLE_RATE)]
    pub fs: f64,
    /// Stimulus frequency set in Hz.
    #[arg(long, value_delimiter = ',', default_value = "7,9,11,13")]
    pub freqs: Vec<f64>,
    /// Occipital channel ids (averaged).
    #[arg(long, value_delimiter = ',', default_value = "o1,o2")]
    pub occipital: Vec<String>,
    /// Ear channel id.
    #[arg(long, default_value = "ear")]
    pub ear: String,
}

impl SessionOpts {
    pub fn options(&self) -> SessionOptions {
        SessionOptions {
            sample_rate: self.fs,
            stimulus_set: self.freqs.clone(),
            channel_roles: ChannelRoles { occipital: self.occipital.clone(), ear: self.ear.clone() },
        }
    }

    pub fn manifest(&self) -> Result<&PathBuf, CliError> {
        self.manifest.as_ref().ok_or_else(|| CliError::Usage("--manifest is required".into()))
    }
}

/// Spectral analysis options.
#[derive(Debug, Clone, Args)]
pub struct AnalysisOpts {
    #[command(flatten)]
    pub filter: FilterOpts,
    /// Segment length in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub segment: f64,
    /// Zero-padding factor before rounding up to a power of two.
    #[arg(long, default_value_t = 8)]
    pub pad_factor: usize,
    /// Read SNR magnitudes at the local maximum within this many Hz of each stimulus.
    #[arg(long)]
    pub local_peak_hz: Option<f64>,
}

impl AnalysisOpts {
    pub fn config(&self, fs: f64) -> AnalysisConfig {
        let filter = self.filter.spec(fs);
        AnalysisConfig {
            analysis_band: (filter.pass_lo, filter.pass_hi),
            filter,
            zero_phase: self.filter.zero_phase,
            segment_s: self.segment,
            pad_factor: self.pad_factor,
            local_peak_hz: self.local_peak_hz,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_delimiter = ',', default_value = "7,9,11,13")]
    pub freqs: Vec<f64>,
    /// Trials per frequency and participant.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    #[arg(long, default_value_t = 5)]
    pub participants: usize,
    /// Trial duration in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub duration: f64,
    #[arg(long, default_value_t = model::DEFAULT_SAMPLE_RATE)]
    pub fs: f64,
    #[arg(long, env = "SSVEP_SEED", default_value_t = 42)]
    pub seed: u64,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Fundamental amplitude in microvolts.
    #[arg(long, default_value_t = 10.0)]
    pub fundamental_uv: f64,
    /// 1/f noise RMS in microvolts.
    #[arg(long, default_value_t = 10.0)]
    pub noise_uv: f64,
    /// Relative harmonic amplitudes (2f, 3f, ...); pass an empty string for none.
    #[arg(long, value_delimiter = ',', default_value = "0.3")]
    pub harmonics: Vec<String>,
    #[arg(long, default_value_t = 0.8)]
    pub ear_attenuation: f64,
    /// Per-trial amplitude spread: gains drawn from [1 - s, 1 + s].
    #[arg(long, default_value_t = 0.5)]
    pub gain_spread: f64,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[command(flatten)]
    pub filter: FilterOpts,
    #[arg(long, default_value_t = model::DEFAULT_SAMPLE_RATE)]
    pub fs: f64,
    /// Recording CSV to filter; without it the coefficients are written.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Output path (stdout when omitted).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Also write the magnitude/phase response on a 1024-point grid.
    #[arg(long)]
    pub response: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub session: SessionOpts,
    #[command(flatten)]
    pub analysis: AnalysisOpts,
    /// Per participant x frequency x role table (stdout when omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Per-trial metrics table.
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
    /// Print the effective configuration as JSON and exit.
    #[arg(long)]
    pub dump_config: bool,
}

#[derive(Debug, Args)]
pub struct SpectrogramArgs {
    #[command(flatten)]
    pub session: SessionOpts,
    #[arg(long)]
    pub trial: String,
    /// Channel id, or "occipital" for the occipital average.
    #[arg(long, default_value = "occipital")]
    pub channel: String,
    /// Window length in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub window: f64,
    #[arg(long, default_value_t = 0.5)]
    pub overlap: f64,
    #[arg(long, value_parser = parse_range, default_value = "5:40")]
    pub band: (f64, f64),
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write an SVG heat map next to --out.
    #[arg(long)]
    pub svg: bool,
}

#[derive(Debug, Args)]
pub struct CorrelateArgs {
    #[command(flatten)]
    pub session: SessionOpts,
    #[command(flatten)]
    pub analysis: AnalysisOpts,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub session: SessionOpts,
    #[command(flatten)]
    pub analysis: AnalysisOpts,
    /// Box-plot summary of normalized segment amplitudes.
    #[arg(long)]
    pub boxplot: Option<PathBuf>,
    /// Paired normalized segment amplitudes.
    #[arg(long)]
    pub scatter: Option<PathBuf>,
    /// One-second excerpt of a trial through the 6-8 Hz display filter.
    #[arg(long)]
    pub waveform: Option<PathBuf>,
    /// Spectrogram of a trial (5-40 Hz, 1 s windows, 50% overlap).
    #[arg(long)]
    pub spectrogram: Option<PathBuf>,
    /// Trial for --waveform/--spectrogram (first trial when omitted).
    #[arg(long)]
    pub trial: Option<String>,
    /// Start of the waveform excerpt within the trial, in seconds.
    #[arg(long, default_value_t = 5.0)]
    pub excerpt_start: f64,
    /// Also write SVG renderings next to each CSV.
    #[arg(long)]
    pub svg: bool,
}

/// Detector parameters.
#[derive(Debug, Clone, Args)]
pub struct DetectOpts {
    #[arg(long, default_value = "ear")]
    pub channel: String,
    /// Window length in seconds.
    #[arg(long, default_value_t = 2.0)]
    pub window: f64,
    /// Hop in seconds.
    #[arg(long, default_value_t = 1.0)]
    pub hop: f64,
    /// Abstain when the best score leads the runner-up by less than this.
    #[arg(long, default_value_t = 1.0)]
    pub margin_db: f64,
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    #[command(flatten)]
    pub session: SessionOpts,
    #[command(flatten)]
    pub filter: FilterOpts,
    #[command(flatten)]
    pub detect: DetectOpts,
    /// Restrict to one trial.
    #[arg(long)]
    pub trial: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct StreamArgs {
    #[command(flatten)]
    pub session: SessionOpts,
    #[command(flatten)]
    pub filter: FilterOpts,
    #[command(flatten)]
    pub detect: DetectOpts,
    #[arg(long)]
    pub trial: String,
    /// Pace samples at the sampling rate.
    #[arg(long)]
    pub realtime: bool,
}

/// Parse `args` (including the program name) and run, writing results to
/// `out` and diagnostics to `err`. Returns the exit status.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            let _ = if code == 0 { out.write_all(rendered.as_bytes()) } else { err.write_all(rendered.as_bytes()) };
            return code;
        }
    };
    match commands::dispatch(cli.command, out, err) {
        Ok(()) | Err(CliError::OutputClosed) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// [`run_with`] on the process's stdout and stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
