//! Welch-style band periodogram evaluated on a dense frequency grid, and the
//! softmax-weighted frequency centroid built on it.
//!
//! The centroid is a smooth function of the input samples; its analytic
//! gradient is provided so it can serve as a training loss.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Respiratory band in Hz.
    pub band_hz: (f64, f64),
    /// Spacing of the evaluation grid in Hz.
    pub grid_step_hz: f64,
    /// Welch segment length in seconds; segments overlap by half.
    pub segment_s: f64,
    /// Softmax sharpness applied to the mean-normalized band power.
    pub beta: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            band_hz: (0.1, 0.8),
            grid_step_hz: 0.005,
            segment_s: 30.0,
            beta: 2.0,
        }
    }
}

impl SpectralConfig {
    pub fn grid(&self) -> Vec<f64> {
        let (lo, hi) = self.band_hz;
        let bins = ((hi - lo) / self.grid_step_hz + 1e-9).floor() as usize + 1;
        (0..bins)
            .map(|j| lo + j as f64 * self.grid_step_hz)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandSpectrum {
    pub freqs: Vec<f64>,
    pub power: Vec<f64>,
}

/// Result of the soft spectral rate estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SoftRate {
    pub rate_brpm: f64,
    /// `1 - H / ln(bins)` where `H` is the entropy of the normalized band power.
    pub confidence: f64,
    /// True when the band holds no measurable energy.
    pub degenerate: bool,
}

fn hann(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![1.0];
    }
    (0..m)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (m - 1) as f64).cos())
        .collect()
}

fn segment_starts(n: usize, m: usize) -> Vec<usize> {
    let step = (m / 2).max(1);
    let mut starts = vec![0];
    while starts.last().unwrap() + step + m <= n {
        let next = starts.last().unwrap() + step;
        starts.push(next);
    }
    starts
}

struct Segments {
    len: usize,
    starts: Vec<usize>,
    window: Vec<f64>,
}

impl Segments {
    fn new(n: usize, fs: f64, cfg: &SpectralConfig) -> Self {
        let len = ((cfg.segment_s * fs).round() as usize).clamp(1, n.max(1));
        Self {
            len,
            starts: segment_starts(n, len),
            window: hann(len),
        }
    }

    /// Windowed, mean-removed copy of one segment.
    fn tapered(&self, x: &[f64], start: usize) -> Vec<f64> {
        let seg = &x[start..start + self.len];
        let m = super::mean(seg);
        seg.iter()
            .zip(&self.window)
            .map(|(v, h)| (v - m) * h)
            .collect()
    }
}

/// Cosine and sine sums of `z` at frequency `f`.
fn dtft(z: &[f64], f: f64, fs: f64) -> (f64, f64) {
    let dtheta = 2.0 * PI * f / fs;
    let (ds, dc) = dtheta.sin_cos();
    let (mut c, mut s) = (1.0, 0.0);
    let (mut re, mut im) = (0.0, 0.0);
    for v in z {
        re += v * c;
        im += v * s;
        (c, s) = (c * dc - s * ds, s * dc + c * ds);
    }
    (re, im)
}

struct Evaluated {
    freqs: Vec<f64>,
    power: Vec<f64>,
    // Per segment, per bin (cos sum, sin sum).
    coeffs: Vec<Vec<(f64, f64)>>,
    segments: Segments,
}

fn evaluate(x: &[f64], fs: f64, cfg: &SpectralConfig) -> Evaluated {
    let segments = Segments::new(x.len(), fs, cfg);
    let freqs = cfg.grid();
    let nseg = segments.starts.len() as f64;
    let mut power = vec![0.0; freqs.len()];
    let mut coeffs = Vec::with_capacity(segments.starts.len());
    for &start in &segments.starts {
        let z = segments.tapered(x, start);
        let cs: Vec<(f64, f64)> = freqs.iter().map(|&f| dtft(&z, f, fs)).collect();
        for (p, (c, s)) in power.iter_mut().zip(&cs) {
            *p += (c * c + s * s) / nseg;
        }
        coeffs.push(cs);
    }
    Evaluated {
        freqs,
        power,
        coeffs,
        segments,
    }
}

/// Welch periodogram restricted to the configured band (unnormalized).
pub fn welch_band(x: &[f64], fs: f64, cfg: &SpectralConfig) -> BandSpectrum {
    let e = evaluate(x, fs, cfg);
    BandSpectrum {
        freqs: e.freqs,
        power: e.power,
    }
}

fn is_degenerate(x: &[f64], power: &[f64], seg_len: usize) -> bool {
    let total: f64 = power.iter().sum();
    let energy: f64 = x.iter().map(|v| v * v).sum::<f64>() * seg_len as f64;
    !(total.is_finite() && total > 1e-24 * energy && total > 0.0)
}

fn softmax_weights(power: &[f64], beta: f64) -> (Vec<f64>, Vec<f64>, f64) {
    let mean_p = power.iter().sum::<f64>() / power.len() as f64;
    let norm: Vec<f64> = power.iter().map(|p| p / mean_p).collect();
    let peak = norm.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = norm.iter().map(|v| (beta * (v - peak)).exp()).collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= z);
    (w, norm, mean_p)
}

fn entropy_confidence(power: &[f64]) -> f64 {
    let total: f64 = power.iter().sum();
    let h: f64 = power
        .iter()
        .map(|p| p / total)
        .filter(|q| *q > 0.0)
        .map(|q| -q * q.ln())
        .sum();
    (1.0 - h / (power.len() as f64).ln()).clamp(0.0, 1.0)
}

/// Softmax weights, normalized power and mean power.
type Weights = (Vec<f64>, Vec<f64>, f64);

fn rate_from(e: &Evaluated, x: &[f64], beta: f64) -> (SoftRate, Option<Weights>) {
    if is_degenerate(x, &e.power, e.segments.len) {
        let r = SoftRate {
            rate_brpm: 0.0,
            confidence: 0.0,
            degenerate: true,
        };
        return (r, None);
    }
    let (w, norm, mean_p) = softmax_weights(&e.power, beta);
    let centroid: f64 = w.iter().zip(&e.freqs).map(|(w, f)| w * f).sum();
    let r = SoftRate {
        rate_brpm: 60.0 * centroid,
        confidence: entropy_confidence(&e.power),
        degenerate: false,
    };
    (r, Some((w, norm, mean_p)))
}

/// Softmax-weighted spectral centroid rate in breaths/min.
pub fn soft_rate(x: &[f64], fs: f64, cfg: &SpectralConfig) -> SoftRate {
    let e = evaluate(x, fs, cfg);
    rate_from(&e, x, cfg.beta).0
}

/// [`soft_rate`] together with the gradient of `rate_brpm` with respect to
/// every input sample. The gradient is all zeros for degenerate input.
pub fn soft_rate_with_grad(x: &[f64], fs: f64, cfg: &SpectralConfig) -> (SoftRate, Vec<f64>) {
    let e = evaluate(x, fs, cfg);
    let (rate, parts) = rate_from(&e, x, cfg.beta);
    let mut grad = vec![0.0; x.len()];
    let Some((w, norm, mean_p)) = parts else {
        return (rate, grad);
    };
    let bins = e.freqs.len() as f64;
    let centroid = rate.rate_brpm / 60.0;
    // d rate / d normalized power.
    let g: Vec<f64> = w
        .iter()
        .zip(&e.freqs)
        .map(|(w, f)| 60.0 * cfg.beta * w * (f - centroid))
        .collect();
    let g_dot_norm: f64 = g.iter().zip(&norm).map(|(a, b)| a * b).sum();
    // d rate / d raw power, through p / mean(p).
    let d_power: Vec<f64> = g
        .iter()
        .map(|gj| (gj - g_dot_norm / bins) / mean_p)
        .collect();

    let nseg = e.segments.starts.len() as f64;
    let m = e.segments.len;
    for (start, cs) in e.segments.starts.iter().zip(&e.coeffs) {
        // a_n = h_n * d rate / d z_n
        let mut a = vec![0.0; m];
        for ((&f, &(c_sum, s_sum)), &dp) in e.freqs.iter().zip(cs).zip(&d_power) {
            let scale = 2.0 * dp / nseg;
            let dtheta = 2.0 * PI * f / fs;
            let (ds, dc) = dtheta.sin_cos();
            let (mut c, mut s) = (1.0, 0.0);
            for an in a.iter_mut() {
                *an += scale * (c_sum * c + s_sum * s);
                (c, s) = (c * dc - s * ds, s * dc + c * ds);
            }
        }
        for (an, h) in a.iter_mut().zip(&e.segments.window) {
            *an *= h;
        }
        let a_mean = super::mean(&a);
        for (i, an) in a.iter().enumerate() {
            grad[start + i] += an - a_mean;
        }
    }
    (rate, grad)
}
