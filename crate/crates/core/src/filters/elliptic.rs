//! Jacobi elliptic functions and the analog elliptic lowpass prototype.
//!
//! The elliptic functions are evaluated with descending Landen
//! transformations, which converge in a handful of steps for any modulus
//! in `[0, 1)` and work for complex arguments. Arguments are normalized by
//! the complete integral: `sne(u, k)` is `sn(u·K(k), k)`.

use num_complex::Complex64;
use std::f64::consts::FRAC_PI_2;

const LANDEN_TOL: f64 = 1e-16;

/// Descending Landen sequence `k_1, k_2, ...` for modulus `k`.
fn landen(k: f64) -> Vec<f64> {
    let mut seq = Vec::with_capacity(8);
    let mut k = k;
    while k > LANDEN_TOL && seq.len() < 32 {
        let kp = ((1.0 - k) * (1.0 + k)).sqrt();
        k = (k / (1.0 + kp)).powi(2);
        seq.push(k);
    }
    seq
}

/// Complete elliptic integral of the first kind, `K(k)`.
pub fn ellipk(k: f64) -> f64 {
    landen(k).iter().fold(FRAC_PI_2, |acc, v| acc * (1.0 + v))
}

/// Complementary modulus `sqrt(1 - k²)`.
pub fn complement(k: f64) -> f64 {
    ((1.0 - k) * (1.0 + k)).sqrt()
}

fn ascend(mut w: Complex64, seq: &[f64]) -> Complex64 {
    for &v in seq.iter().rev() {
        w = (1.0 + v) * w / (1.0 + v * w * w);
    }
    w
}

/// `sn(u·K, k)` for complex normalized argument `u`.
pub fn sne(u: Complex64, k: f64) -> Complex64 {
    ascend((u * FRAC_PI_2).sin(), &landen(k))
}

/// `cd(u·K, k)` for complex normalized argument `u`.
pub fn cde(u: Complex64, k: f64) -> Complex64 {
    ascend((u * FRAC_PI_2).cos(), &landen(k))
}

/// Inverse of [`sne`]: returns normalized `u` with `sn(u·K, k) = w`.
pub fn asne(w: Complex64, k: f64) -> Complex64 {
    let seq = landen(k);
    let mut w = w;
    let mut prev = k;
    for &v in &seq {
        w = w / (1.0 + (1.0 - w * w * prev * prev).sqrt()) * (2.0 / (1.0 + v));
        prev = v;
    }
    w.asin() / FRAC_PI_2
}

/// `ε = sqrt(10^(dB/10) - 1)`.
pub fn ripple_epsilon(db: f64) -> f64 {
    (10f64.powf(db / 10.0) - 1.0).sqrt()
}

/// Discrimination modulus `k1` reached by an order-`n` elliptic prototype
/// with selectivity `k` (exact solution of the degree equation).
pub fn discrimination_modulus(n: usize, k: f64) -> f64 {
    let l = n / 2;
    let prod: f64 = (1..=l)
        .map(|i| {
            let u = (2 * i - 1) as f64 / n as f64;
            sne(Complex64::new(u, 0.0), k).re.powi(4)
        })
        .product();
    k.powi(n as i32) * prod
}

/// Stopband attenuation (dB) reached by an order-`n` prototype with
/// passband ripple `ripple_db` and selectivity `k = Ωp/Ωs`.
pub fn achieved_attenuation_db(n: usize, ripple_db: f64, k: f64) -> f64 {
    let ep = ripple_epsilon(ripple_db);
    let k1 = discrimination_modulus(n, k);
    10.0 * (1.0 + (ep / k1).powi(2)).log10()
}

/// Smallest prototype order meeting `ripple_db`/`atten_db` at selectivity `k`.
pub fn minimum_order(ripple_db: f64, atten_db: f64, k: f64) -> usize {
    let k1 = ripple_epsilon(ripple_db) / ripple_epsilon(atten_db);
    let ratio = ellipk(k) * ellipk(complement(k1)) / (ellipk(complement(k)) * ellipk(k1));
    // guard against 2.0000000001 rounding up to 3
    (ratio - 1e-9).ceil().max(1.0) as usize
}

/// Zeros and poles of the analog elliptic lowpass prototype with passband
/// edge at 1 rad/s. Only the upper half-plane member of each conjugate
/// pair is listed; a real pole (odd order) is carried separately.
#[derive(Debug, Clone)]
pub struct Prototype {
    pub order: usize,
    pub zeros: Vec<Complex64>,
    pub poles: Vec<Complex64>,
    pub real_pole: Option<f64>,
    pub attenuation_db: f64,
}

pub fn prototype(n: usize, ripple_db: f64, k: f64) -> Prototype {
    let ep = ripple_epsilon(ripple_db);
    let k1 = discrimination_modulus(n, k);
    let j = Complex64::i();

    // asne of a pure imaginary argument is pure imaginary
    let v0 = (-j * asne(j / ep, k1)).re / n as f64;

    let mut zeros = Vec::new();
    let mut poles = Vec::new();
    for i in 1..=n / 2 {
        let u = (2 * i - 1) as f64 / n as f64;
        let zeta = cde(Complex64::new(u, 0.0), k).re;
        zeros.push(j / (k * zeta));
        let p = j * cde(Complex64::new(u, -v0), k);
        // keep the upper half-plane representative, left half-plane by construction
        poles.push(if p.im < 0.0 { p.conj() } else { p });
    }
    let real_pole = (n % 2 == 1).then(|| (j * sne(Complex64::new(0.0, v0), k)).re);

    Prototype {
        order: n,
        zeros,
        poles,
        real_pole,
        attenuation_db: 10.0 * (1.0 + (ep / k1).powi(2)).log10(),
    }
}
