//! Elliptic IIR bandpass design and second-order-section filtering.
//!
//! Design path: analog elliptic lowpass prototype, lowpass-to-bandpass
//! transform, bilinear transform with all four band edges prewarped. The
//! filter "order" is the final bandpass order, so an order-4 design is two
//! biquads built from a second-order prototype.

pub mod elliptic;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

use elliptic::Prototype;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("invalid band edges: {0}")]
    InvalidBandEdges(String),
    #[error("invalid filter order {0}: must be even and at least 2")]
    InvalidOrder(usize),
    #[error("invalid ripple/attenuation: {0}")]
    InvalidRipple(String),
    #[error(
        "infeasible specification: order {order} reaches {achieved_db:.2} dB at the stop edges, \
         {requested_db:.2} dB requested (needs order >= {required_order})"
    )]
    InfeasibleSpec {
        order: usize,
        requested_db: f64,
        achieved_db: f64,
        required_order: usize,
    },
    #[error("frequency {freq} Hz outside [0, {nyquist}] Hz")]
    FrequencyOutOfRange { freq: f64, nyquist: f64 },
    #[error("series of {len} samples too short for zero-phase filtering (need > {min})")]
    SeriesTooShort { len: usize, min: usize },
}

/// One second-order section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad { b0: 1.0, b1: 0.0, b2: 0.0, a1: 0.0, a2: 0.0 };

    /// Complex gain at `z = e^{jω}`.
    pub fn response(&self, omega: f64) -> Complex64 {
        let z1 = Complex64::from_polar(1.0, -omega);
        let z2 = z1 * z1;
        (self.b0 + self.b1 * z1 + self.b2 * z2) / (1.0 + self.a1 * z1 + self.a2 * z2)
    }

    /// Roots of `z² + a1 z + a2`.
    pub fn poles(&self) -> [Complex64; 2] {
        let disc = Complex64::new(self.a1 * self.a1 - 4.0 * self.a2, 0.0).sqrt();
        [(-self.a1 + disc) / 2.0, (-self.a1 - disc) / 2.0]
    }

    pub fn max_pole_radius(&self) -> f64 {
        let [p, q] = self.poles();
        p.norm().max(q.norm())
    }
}

/// Parameters of an elliptic bandpass request plus what the design achieved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipticDesign {
    pub order: usize,
    pub passband_hz: (f64, f64),
    pub stopband_hz: (f64, f64),
    pub passband_ripple_db: f64,
    /// Requested minimum attenuation; `None` means "whatever the order reaches".
    pub requested_atten_db: Option<f64>,
    /// Attenuation guaranteed beyond the stop edges by the designed filter.
    pub stopband_atten_db: f64,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterCoefficients {
    pub sections: Vec<Biquad>,
    pub sample_rate: f64,
    pub design: Option<EllipticDesign>,
}

impl FilterCoefficients {
    /// Wrap hand-written sections (no design metadata).
    pub fn from_sections(sections: Vec<Biquad>, sample_rate: f64) -> Self {
        Self { sections, sample_rate, design: None }
    }

    pub fn identity(sample_rate: f64) -> Self {
        Self::from_sections(vec![Biquad::IDENTITY], sample_rate)
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(|s| s.max_pole_radius() < 1.0 - 1e-9)
    }
}

/// A bandpass request with the paper's defaults available via [`BandpassSpec::paper`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandpassSpec {
    pub order: usize,
    pub pass_lo: f64,
    pub pass_hi: f64,
    pub stop_lo: f64,
    pub stop_hi: f64,
    pub ripple_db: f64,
    pub atten_db: Option<f64>,
    pub fs: f64,
}

impl BandpassSpec {
    /// Order 4, 6–14 Hz pass, 5–15 Hz stop, 1 dB ripple at 250 Hz.
    pub fn paper() -> Self {
        Self {
            order: 4,
            pass_lo: 6.0,
            pass_hi: 14.0,
            stop_lo: 5.0,
            stop_hi: 15.0,
            ripple_db: 1.0,
            atten_db: None,
            fs: 250.0,
        }
    }

    /// Narrowband 6–8 Hz display filter (5–9 Hz stop edges).
    pub fn display() -> Self {
        Self { pass_lo: 6.0, pass_hi: 8.0, stop_lo: 5.0, stop_hi: 9.0, ..Self::paper() }
    }

    pub fn with_fs(self, fs: f64) -> Self {
        Self { fs, ..self }
    }

    pub fn design(&self) -> Result<FilterCoefficients, FilterError> {
        design_elliptic_bandpass_opt(
            self.order,
            self.pass_lo,
            self.pass_hi,
            self.stop_lo,
            self.stop_hi,
            self.ripple_db,
            self.atten_db,
            self.fs,
        )
    }
}

fn prewarp(f: f64, fs: f64) -> f64 {
    2.0 * fs * (PI * f / fs).tan()
}

struct BandGeometry {
    center_sq: f64,
    width: f64,
    selectivity: f64,
}

fn validate_and_map(
    order: usize,
    pass: (f64, f64),
    stop: (f64, f64),
    ripple_db: f64,
    fs: f64,
) -> Result<BandGeometry, FilterError> {
    let edges = [stop.0, pass.0, pass.1, stop.1];
    if !(fs.is_finite() && fs > 0.0) || edges.iter().any(|e| !e.is_finite()) {
        return Err(FilterError::InvalidBandEdges(format!("non-finite edge or fs={fs}")));
    }
    let ordered = 0.0 < stop.0 && stop.0 < pass.0 && pass.0 < pass.1 && pass.1 < stop.1 && stop.1 < fs / 2.0;
    if !ordered {
        return Err(FilterError::InvalidBandEdges(format!(
            "need 0 < {} < {} < {} < {} < {}",
            stop.0,
            pass.0,
            pass.1,
            stop.1,
            fs / 2.0
        )));
    }
    if order < 2 || !order.is_multiple_of(2) {
        return Err(FilterError::InvalidOrder(order));
    }
    if !(ripple_db.is_finite() && ripple_db > 0.0) {
        return Err(FilterError::InvalidRipple(format!("ripple {ripple_db} dB must be > 0")));
    }

    let (wp1, wp2) = (prewarp(pass.0, fs), prewarp(pass.1, fs));
    let (ws1, ws2) = (prewarp(stop.0, fs), prewarp(stop.1, fs));
    let center_sq = wp1 * wp2;
    let width = wp2 - wp1;
    let to_lowpass = |w: f64| ((w * w - center_sq) / (width * w)).abs();
    let omega_s = to_lowpass(ws1).min(to_lowpass(ws2));
    Ok(BandGeometry { center_sq, width, selectivity: 1.0 / omega_s })
}

/// Smallest even bandpass order meeting the ripple/attenuation request.
pub fn minimum_bandpass_order(
    pass: (f64, f64),
    stop: (f64, f64),
    ripple_db: f64,
    atten_db: f64,
    fs: f64,
) -> Result<usize, FilterError> {
    let geo = validate_and_map(2, pass, stop, ripple_db, fs)?;
    if !(atten_db.is_finite() && atten_db > ripple_db) {
        return Err(FilterError::InvalidRipple(format!(
            "attenuation {atten_db} dB must exceed ripple {ripple_db} dB"
        )));
    }
    Ok(2 * elliptic::minimum_order(ripple_db, atten_db, geo.selectivity))
}

/// Strict design: fails with `InfeasibleSpec` when `order` cannot reach
/// `atten_db` beyond the stop edges.
#[allow(clippy::too_many_arguments)]
pub fn design_elliptic_bandpass(
    order: usize,
    pass_lo: f64,
    pass_hi: f64,
    stop_lo: f64,
    stop_hi: f64,
    ripple_db: f64,
    atten_db: f64,
    fs: f64,
) -> Result<FilterCoefficients, FilterError> {
    design_elliptic_bandpass_opt(order, pass_lo, pass_hi, stop_lo, stop_hi, ripple_db, Some(atten_db), fs)
}

/// Like [`design_elliptic_bandpass`]; with `atten_db = None` the design
/// keeps all four edges and reports the attenuation the order reaches.
#[allow(clippy::too_many_arguments)]
pub fn design_elliptic_bandpass_opt(
    order: usize,
    pass_lo: f64,
    pass_hi: f64,
    stop_lo: f64,
    stop_hi: f64,
    ripple_db: f64,
    atten_db: Option<f64>,
    fs: f64,
) -> Result<FilterCoefficients, FilterError> {
    let pass = (pass_lo, pass_hi);
    let stop = (stop_lo, stop_hi);
    let geo = validate_and_map(order, pass, stop, ripple_db, fs)?;
    let n = order / 2;
    let proto = elliptic::prototype(n, ripple_db, geo.selectivity);

    if let Some(requested) = atten_db {
        if !(requested.is_finite() && requested > ripple_db) {
            return Err(FilterError::InvalidRipple(format!(
                "attenuation {requested} dB must exceed ripple {ripple_db} dB"
            )));
        }
        if proto.attenuation_db < requested - 1e-9 {
            return Err(FilterError::InfeasibleSpec {
                order,
                requested_db: requested,
                achieved_db: proto.attenuation_db,
                required_order: 2 * elliptic::minimum_order(ripple_db, requested, geo.selectivity),
            });
        }
    }

    let sections = realize(&proto, &geo, ripple_db, fs);
    Ok(FilterCoefficients {
        sections,
        sample_rate: fs,
        design: Some(EllipticDesign {
            order,
            passband_hz: pass,
            stopband_hz: stop,
            passband_ripple_db: ripple_db,
            requested_atten_db: atten_db,
            stopband_atten_db: proto.attenuation_db,
            sample_rate: fs,
        }),
    })
}

/// Analog root `r` of the lowpass prototype → the two bandpass roots.
fn lowpass_to_bandpass(r: Complex64, geo: &BandGeometry) -> [Complex64; 2] {
    let rb = r * geo.width;
    let disc = (rb * rb - 4.0 * geo.center_sq).sqrt();
    [(rb + disc) / 2.0, (rb - disc) / 2.0]
}

fn bilinear(s: Complex64, fs: f64) -> Complex64 {
    (2.0 * fs + s) / (2.0 * fs - s)
}

/// Upper-half representative of a conjugate pair (real roots pass through).
fn upper(z: Complex64) -> Complex64 {
    if z.im < 0.0 {
        z.conj()
    } else {
        z
    }
}

#[derive(Clone, Copy)]
enum RootPair {
    Conjugate(Complex64),
    Real(f64, f64),
}

impl RootPair {
    fn coefficients(self) -> (f64, f64) {
        match self {
            RootPair::Conjugate(z) => (-2.0 * z.re, z.norm_sqr()),
            RootPair::Real(a, b) => (-(a + b), a * b),
        }
    }

    fn representative(self) -> Complex64 {
        match self {
            RootPair::Conjugate(z) => z,
            RootPair::Real(a, b) => Complex64::new(if a.abs() > b.abs() { a } else { b }, 0.0),
        }
    }

    fn radius(self) -> f64 {
        match self {
            RootPair::Conjugate(z) => z.norm(),
            RootPair::Real(a, b) => a.abs().max(b.abs()),
        }
    }
}

fn realize(proto: &Prototype, geo: &BandGeometry, ripple_db: f64, fs: f64) -> Vec<Biquad> {
    let mut pole_pairs: Vec<RootPair> = Vec::new();
    let mut zero_pairs: Vec<RootPair> = Vec::new();

    for &p in &proto.poles {
        for s in lowpass_to_bandpass(p, geo) {
            pole_pairs.push(RootPair::Conjugate(upper(bilinear(s, fs))));
        }
    }
    if let Some(p0) = proto.real_pole {
        let [s1, s2] = lowpass_to_bandpass(Complex64::new(p0, 0.0), geo);
        let (z1, z2) = (bilinear(s1, fs), bilinear(s2, fs));
        if z1.im.abs() > 1e-12 * z1.norm() {
            pole_pairs.push(RootPair::Conjugate(upper(z1)));
        } else {
            pole_pairs.push(RootPair::Real(z1.re, z2.re));
        }
    }
    for &z in &proto.zeros {
        for s in lowpass_to_bandpass(z, geo) {
            zero_pairs.push(RootPair::Conjugate(upper(bilinear(s, fs))));
        }
    }
    if proto.real_pole.is_some() {
        // odd prototype: one bandpass zero at s = 0 and one at s = ∞
        zero_pairs.push(RootPair::Real(1.0, -1.0));
    }

    // Pair the sharpest poles first with their nearest zeros.
    pole_pairs.sort_by(|a, b| b.radius().total_cmp(&a.radius()));
    let mut sections = Vec::with_capacity(pole_pairs.len());
    for pole in &pole_pairs {
        let rep = pole.representative();
        let (idx, _) = zero_pairs
            .iter()
            .enumerate()
            .map(|(i, z)| (i, (z.representative() - rep).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .expect("as many zero pairs as pole pairs");
        let zero = zero_pairs.swap_remove(idx);
        let (b1, b2) = zero.coefficients();
        let (a1, a2) = pole.coefficients();
        sections.push(Biquad { b0: 1.0, b1, b2, a1, a2 });
    }
    sections.reverse();

    // Unit gain per section at the band center, then the overall level:
    // the prototype's DC gain is 1/sqrt(1+ε²) for even order, 1 for odd.
    let center_analog = geo.center_sq.sqrt();
    let omega_center = 2.0 * (center_analog / (2.0 * fs)).atan();
    for s in &mut sections {
        let g = 1.0 / s.response(omega_center).norm();
        s.b0 *= g;
        s.b1 *= g;
        s.b2 *= g;
    }
    let level = if proto.order.is_multiple_of(2) {
        1.0 / (1.0 + elliptic::ripple_epsilon(ripple_db).powi(2)).sqrt()
    } else {
        1.0
    };
    if let Some(first) = sections.first_mut() {
        first.b0 *= level;
        first.b1 *= level;
        first.b2 *= level;
    }
    sections
}

/// Complex gain of the cascade at each frequency (Hz).
pub fn frequency_response(f: &FilterCoefficients, freqs: &[f64]) -> Result<Vec<Complex64>, FilterError> {
    let nyquist = f.sample_rate / 2.0;
    freqs
        .iter()
        .map(|&freq| {
            if !(0.0..=nyquist).contains(&freq) {
                return Err(FilterError::FrequencyOutOfRange { freq, nyquist });
            }
            let omega = 2.0 * PI * freq / f.sample_rate;
            Ok(f.sections.iter().map(|s| s.response(omega)).product())
        })
        .collect()
}

/// Causal transposed direct-form II cascade, zero initial state.
pub fn apply_filter(f: &FilterCoefficients, x: &[f64]) -> Vec<f64> {
    let mut y = x.to_vec();
    for s in &f.sections {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in y.iter_mut() {
            let input = *v;
            let out = s.b0 * input + z1;
            z1 = s.b1 * input - s.a1 * out + z2;
            z2 = s.b2 * input - s.a2 * out;
            *v = out;
        }
    }
    y
}

/// Forward-backward filtering with odd-symmetric edge extension of
/// `3 × 2 × sections` samples on each side.
pub fn apply_filter_zero_phase(f: &FilterCoefficients, x: &[f64]) -> Result<Vec<f64>, FilterError> {
    let pad = 3 * 2 * f.sections.len();
    if x.len() <= pad {
        return Err(FilterError::SeriesTooShort { len: x.len(), min: pad });
    }
    let n = x.len();
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));

    let mut y = apply_filter(f, &ext);
    y.reverse();
    let mut y = apply_filter(f, &y);
    y.reverse();
    Ok(y[pad..pad + n].to_vec())
}
