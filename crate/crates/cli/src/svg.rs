//! Minimal self-contained SVG renderings of the plot CSVs.

use std::fmt::Write;

use ssvep_core::spectral::SpectrogramGrid;
use ssvep_core::stats::{AmplitudeDataset, BoxStats};

const W: f64 = 640.0;
const H: f64 = 400.0;
const M: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

struct Axis {
    lo: f64,
    hi: f64,
    px_lo: f64,
    px_hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64, px_lo: f64, px_hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { lo, hi, px_lo, px_hi }
    }

    fn map(&self, v: f64) -> f64 {
        self.px_lo + (v - self.lo) / (self.hi - self.lo) * (self.px_hi - self.px_lo)
    }
}

fn open(title: &str) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"11\">\n"
    );
    let _ = writeln!(s, "<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>");
    let _ = writeln!(s, "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>", W / 2.0, escape(title));
    let _ = writeln!(s, "<rect x=\"{M}\" y=\"{M}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#888\"/>", W - 2.0 * M, H - 2.0 * M);
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn extent<'a>(values: impl Iterator<Item = &'a f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)))
}

pub fn boxplot(boxes: &[(String, BoxStats)]) -> String {
    let mut s = open("normalized segment amplitude");
    let y = Axis::new(0.0, 1.0, H - M, M);
    let slot = (W - 2.0 * M) / boxes.len().max(1) as f64;
    for (i, (label, b)) in boxes.iter().enumerate() {
        let cx = M + slot * (i as f64 + 0.5);
        let half = slot * 0.3;
        let color = COLORS[i % 2];
        let _ = writeln!(
            s,
            "<line x1=\"{cx:.2}\" y1=\"{:.2}\" x2=\"{cx:.2}\" y2=\"{:.2}\" stroke=\"{color}\"/>",
            y.map(b.whisker_lo),
            y.map(b.whisker_hi)
        );
        let _ = writeln!(
            s,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"white\" stroke=\"{color}\"/>",
            cx - half,
            y.map(b.q3),
            2.0 * half,
            y.map(b.q1) - y.map(b.q3)
        );
        let _ = writeln!(
            s,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>",
            cx - half,
            y.map(b.median),
            cx + half,
            y.map(b.median)
        );
        for o in &b.outliers {
            let _ = writeln!(s, "<circle cx=\"{cx:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{color}\"/>", y.map(*o));
        }
        let _ = writeln!(
            s,
            "<text x=\"{cx:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"9\">{}</text>",
            H - M + 14.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn scatter(ds: &AmplitudeDataset) -> String {
    let mut s = open("occipital vs ear normalized amplitude");
    let x = Axis::new(0.0, 1.0, M, W - M);
    let y = Axis::new(0.0, 1.0, H - M, M);
    for (i, f) in ds.frequencies.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        for (o, e) in f.occipital.iter().zip(&f.ear) {
            let _ = writeln!(s, "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"1.5\" fill=\"{color}\" fill-opacity=\"0.5\"/>", x.map(*o), y.map(*e));
        }
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{} Hz</text>", W - M - 50.0, M + 14.0 * (i as f64 + 1.0), f.stimulus_hz);
    }
    s.push_str("</svg>\n");
    s
}

pub fn waveform(t: &[f64], series: &[(String, Vec<f64>)], title: &str) -> String {
    let mut s = open(title);
    let (t_lo, t_hi) = extent(t.iter());
    let (v_lo, v_hi) = extent(series.iter().flat_map(|(_, v)| v.iter()));
    let x = Axis::new(t_lo, t_hi, M, W - M);
    let y = Axis::new(v_lo, v_hi, H - M, M);
    for (i, (id, v)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let points: Vec<String> = t.iter().zip(v).map(|(t, v)| format!("{:.2},{:.2}", x.map(*t), y.map(*v))).collect();
        let _ = writeln!(s, "<polyline fill=\"none\" stroke=\"{color}\" points=\"{}\"/>", points.join(" "));
        let _ = writeln!(s, "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{}</text>", M + 6.0, M + 14.0 * (i as f64 + 1.0), escape(id));
    }
    s.push_str("</svg>\n");
    s
}

pub fn heatmap(g: &SpectrogramGrid, title: &str) -> String {
    let mut s = open(title);
    let max = g.power.iter().flatten().copied().fold(0.0, f64::max);
    let cw = (W - 2.0 * M) / g.times.len().max(1) as f64;
    let ch = (H - 2.0 * M) / g.freqs.len().max(1) as f64;
    for (i, row) in g.power.iter().enumerate() {
        for (j, p) in row.iter().enumerate() {
            let level = if max > 0.0 { (p / max).sqrt() } else { 0.0 };
            let shade = (255.0 * (1.0 - level)).round() as u8;
            let _ = writeln!(
                s,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"rgb(255,{shade},{shade})\"/>",
                M + cw * i as f64,
                H - M - ch * (j as f64 + 1.0),
                cw + 0.1,
                ch + 0.1
            );
        }
    }
    if let (Some(lo), Some(hi)) = (g.freqs.first(), g.freqs.last()) {
        let _ = writeln!(s, "<text x=\"4\" y=\"{}\">{lo} Hz</text>", H - M);
        let _ = writeln!(s, "<text x=\"4\" y=\"{}\">{hi} Hz</text>", M + 10.0);
    }
    s.push_str("</svg>\n");
    s
}
