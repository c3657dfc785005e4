//! Respiratory waveform de-noising, breath detection and respiratory-rate
//! estimation, plus the MAE metric used for evaluation.
//!
//! Two estimators are provided. [`estimate_rr_count`] counts detected breaths
//! and is what evaluation uses. [`estimate_rr_spectral`] is a softmax-weighted
//! spectral centroid; it is differentiable in its input and backs the
//! translator's soft RR loss.

mod breaths;
mod denoise;

pub use breaths::{detect_breaths, detect_peaks};
pub use denoise::denoise;

use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::{self, SpectralConfig};
use crate::error::{Error, Result};

/// Tunables of the RR estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RespConfig {
    /// Pass band of the de-noising filter, Hz.
    pub band_hz: (f64, f64),
    /// Butterworth order of each of the high- and low-pass halves.
    pub filter_order: usize,
    /// Width of the final smoothing window, seconds.
    pub smoothing_s: f64,
    /// Minimum peak prominence as a fraction of the cleaned signal's std.
    pub prominence_frac: f64,
    /// Minimum spacing between detected breaths, seconds.
    pub min_spacing_s: f64,
    /// Minimum input length for the denoiser, seconds.
    pub min_denoise_s: f64,
    /// Minimum input length for the rate estimators, seconds.
    pub min_estimate_s: f64,
}

impl Default for RespConfig {
    fn default() -> Self {
        Self {
            band_hz: (0.1, 0.8),
            filter_order: 2,
            smoothing_s: 0.25,
            prominence_frac: 0.3,
            min_spacing_s: 1.25,
            min_denoise_s: 10.0,
            min_estimate_s: 30.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RrMethod {
    PeakCount,
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RrEstimate {
    pub rate_brpm: f64,
    pub breath_count: usize,
    pub method: RrMethod,
    pub duration_s: f64,
    pub confidence: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CleaningStep {
    Detrend,
    BandPass,
    Smooth,
    Demean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CleanedRespSignal {
    pub samples: Vec<f64>,
    pub sampling_rate_hz: f64,
    pub preprocessing_applied: Vec<CleaningStep>,
}

impl CleanedRespSignal {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }
}

fn check_length(samples: &[f64], fs: f64, min_s: f64, what: &str) -> Result<f64> {
    if !(fs.is_finite() && fs > 0.0) {
        return Err(Error::arg(format!(
            "{what}: sampling rate must be positive, got {fs}"
        )));
    }
    let duration = samples.len() as f64 / fs;
    if duration + 1e-9 < min_s {
        return Err(Error::arg(format!(
            "{what}: need at least {min_s} s of data, got {duration:.3} s"
        )));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg(format!("{what}: non-finite sample")));
    }
    Ok(duration)
}

/// Breath-counting RR estimate: `denoise -> detect_breaths -> count * 60 / duration`.
///
/// Confidence is `1 - CV` of the inter-breath intervals, clamped to [0, 1],
/// and is zero when fewer than two intervals are available.
pub fn estimate_rr_count(samples: &[f64], fs: f64, cfg: &RespConfig) -> Result<RrEstimate> {
    let duration = check_length(samples, fs, cfg.min_estimate_s, "estimate_rr_count")?;
    let cleaned = denoise(samples, fs, cfg)?;
    let onsets = detect_breaths(&cleaned, cfg);
    let count = onsets.len();
    let intervals: Vec<f64> = onsets.windows(2).map(|w| w[1] - w[0]).collect();
    let confidence = if intervals.len() < 2 {
        0.0
    } else {
        let m = crate::dsp::mean(&intervals);
        (1.0 - crate::dsp::std_dev(&intervals) / m).clamp(0.0, 1.0)
    };
    Ok(RrEstimate {
        rate_brpm: count as f64 * 60.0 / duration,
        breath_count: count,
        method: RrMethod::PeakCount,
        duration_s: duration,
        confidence,
    })
}

/// Spectral RR estimate: softmax-weighted frequency centroid of the band
/// periodogram with sharpness `beta`.
///
/// `breath_count` is the implied count `rate * duration / 60`, rounded.
pub fn estimate_rr_spectral(
    samples: &[f64],
    fs: f64,
    beta: f64,
    cfg: &RespConfig,
) -> Result<RrEstimate> {
    let duration = check_length(samples, fs, cfg.min_estimate_s, "estimate_rr_spectral")?;
    let spec_cfg = SpectralConfig {
        band_hz: cfg.band_hz,
        beta,
        ..SpectralConfig::default()
    };
    let r = spectrum::soft_rate(samples, fs, &spec_cfg);
    Ok(RrEstimate {
        rate_brpm: r.rate_brpm,
        breath_count: (r.rate_brpm * duration / 60.0).round() as usize,
        method: RrMethod::Spectral,
        duration_s: duration,
        confidence: r.confidence,
    })
}

/// Mean absolute error between paired rates.
pub fn mae(estimates: &[f64], references: &[f64]) -> Result<f64> {
    if estimates.len() != references.len() {
        return Err(Error::arg(format!(
            "mae: length mismatch ({} vs {})",
            estimates.len(),
            references.len()
        )));
    }
    if estimates.is_empty() {
        return Err(Error::arg("mae: empty input"));
    }
    let total: f64 = estimates
        .iter()
        .zip(references)
        .map(|(e, r)| (e - r).abs())
        .sum();
    Ok(total / estimates.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(f: f64, fs: f64, secs: f64) -> Vec<f64> {
        (0..(fs * secs).round() as usize)
            .map(|i| (2.0 * PI * f * i as f64 / fs).sin())
            .collect()
    }

    #[test]
    fn count_on_quarter_hertz() {
        let e = estimate_rr_count(&tone(0.25, 30.0, 60.0), 30.0, &RespConfig::default()).unwrap();
        assert!((e.rate_brpm - 15.0).abs() <= 1.0, "{e:?}");
        assert!((e.rate_brpm - e.breath_count as f64 * 60.0 / e.duration_s).abs() < 1e-9);
        assert!(e.confidence > 0.8);
    }

    #[test]
    fn count_on_band_lower_edge() {
        let e = estimate_rr_count(&tone(0.1, 30.0, 60.0), 30.0, &RespConfig::default()).unwrap();
        assert!((e.rate_brpm - 6.0).abs() <= 1.0, "{e:?}");
    }

    #[test]
    fn flat_signal_gives_zero_rate_and_confidence() {
        let e = estimate_rr_count(&vec![0.3; 1800], 30.0, &RespConfig::default()).unwrap();
        assert_eq!(e.rate_brpm, 0.0);
        assert_eq!(e.breath_count, 0);
        assert_eq!(e.confidence, 0.0);
        let s = estimate_rr_spectral(&vec![0.3; 1800], 30.0, 2.0, &RespConfig::default()).unwrap();
        assert_eq!(s.rate_brpm, 0.0);
        assert_eq!(s.confidence, 0.0);
    }

    #[test]
    fn too_short_is_an_argument_error() {
        let cfg = RespConfig::default();
        assert!(matches!(
            estimate_rr_count(&tone(0.25, 30.0, 20.0), 30.0, &cfg),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            estimate_rr_spectral(&tone(0.25, 30.0, 29.0), 30.0, 2.0, &cfg),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn spectral_on_quarter_hertz_large_beta() {
        let e = estimate_rr_spectral(&tone(0.25, 30.0, 60.0), 30.0, 50.0, &RespConfig::default())
            .unwrap();
        assert!((e.rate_brpm - 15.0).abs() <= 0.3, "{e:?}");
        assert_eq!(e.method, RrMethod::Spectral);
    }

    #[test]
    fn spectral_mixture_lies_between_tones() {
        let a = tone(0.2, 30.0, 60.0);
        let b = tone(0.3, 30.0, 60.0);
        let x: Vec<f64> = a.iter().zip(&b).map(|(a, b)| a + b).collect();
        let e = estimate_rr_spectral(&x, 30.0, 1.0, &RespConfig::default()).unwrap();
        assert!(e.rate_brpm > 12.0 && e.rate_brpm < 18.0, "{e:?}");
    }

    #[test]
    fn mae_examples() {
        assert_eq!(mae(&[15.0, 17.0], &[16.0, 16.0]).unwrap(), 1.0);
        assert_eq!(mae(&[3.0, 4.0], &[3.0, 4.0]).unwrap(), 0.0);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
        assert!(mae(&[], &[]).is_err());
    }
}
