//! One-sided power spectral density estimates.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

/// Frequencies (Hz) and one-sided PSD values (units^2/Hz).
#[derive(Debug, Clone)]
pub struct Psd {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

impl Psd {
    /// Mean PSD over bins whose frequency lies in `(lo, hi]`.
    pub fn band_mean(&self, lo: f64, hi: f64) -> f64 {
        let (sum, n) = self
            .freqs
            .iter()
            .zip(&self.power)
            .filter(|(f, _)| **f > lo && **f <= hi)
            .fold((0.0, 0usize), |(s, n), (_, p)| (s + p, n + 1));
        sum / n as f64
    }

    /// Largest deviation in dB of a single bin from the band mean, over bins
    /// strictly inside `(lo, hi)`. The two lowest bins are skipped because
    /// per-segment mean removal depresses them.
    pub fn flatness_db(&self, lo: f64, hi: f64) -> f64 {
        let band: Vec<f64> = self
            .freqs
            .iter()
            .zip(&self.power)
            .skip(2)
            .filter(|(f, _)| **f > lo && **f < hi)
            .map(|(_, p)| *p)
            .collect();
        let mean = band.iter().sum::<f64>() / band.len() as f64;
        band.iter()
            .map(|p| (10.0 * (p / mean).log10()).abs())
            .fold(0.0, f64::max)
    }
}

fn one_sided(spec: &[Complex<f64>], scale: f64, dt: f64) -> Psd {
    let n = spec.len();
    let half = n / 2;
    let df = 1.0 / (n as f64 * dt);
    let mut freqs = Vec::with_capacity(half + 1);
    let mut power = Vec::with_capacity(half + 1);
    for (k, c) in spec.iter().take(half + 1).enumerate() {
        let edge = k == 0 || (n.is_multiple_of(2) && k == half);
        let p = c.norm_sqr() * scale * if edge { 1.0 } else { 2.0 };
        freqs.push(k as f64 * df);
        power.push(p);
    }
    Psd { freqs, power }
}

/// Full-length rectangular-window periodogram.
pub fn periodogram(x: &[f64], dt: f64) -> Psd {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new()
        .plan_fft_forward(buf.len())
        .process(&mut buf);
    let scale = dt / x.len() as f64;
    one_sided(&buf, scale, dt)
}

/// Welch estimate: Hann window, 50% overlap, mean removed per segment.
///
/// Panics if `segment < 4` or `segment > x.len()`.
pub fn welch(x: &[f64], dt: f64, segment: usize) -> Psd {
    assert!(
        segment >= 4 && segment <= x.len(),
        "bad Welch segment length"
    );
    let step = segment / 2;
    let window: Vec<f64> = (0..segment)
        .map(|i| {
            let s = (std::f64::consts::PI * i as f64 / segment as f64).sin();
            s * s
        })
        .collect();
    let wss: f64 = window.iter().map(|w| w * w).sum();
    let fft = FftPlanner::new().plan_fft_forward(segment);
    let mut acc = vec![0.0; segment / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); segment];
    let mut count = 0usize;
    let mut start = 0;
    while start + segment <= x.len() {
        let seg = &x[start..start + segment];
        let m = seg.iter().sum::<f64>() / segment as f64;
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new((v - m) * w, 0.0);
        }
        fft.process(&mut buf);
        let psd = one_sided(&buf, dt / wss, dt);
        for (a, p) in acc.iter_mut().zip(psd.power) {
            *a += p;
        }
        count += 1;
        start += step;
    }
    let df = 1.0 / (segment as f64 * dt);
    Psd {
        freqs: (0..acc.len()).map(|k| k as f64 * df).collect(),
        power: acc.into_iter().map(|p| p / count as f64).collect(),
    }
}
