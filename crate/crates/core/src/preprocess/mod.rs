//! Raw 125 Hz records to normalized 30 Hz, 30 s window pairs.

pub mod manifest;

use serde::{Deserialize, Serialize};

use crate::dataset::{Channel, SignalRecord, SubjectBundle};
use crate::dsp::resample::{rational_ratio, PolyphaseResampler};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowConfig {
    pub target_rate_hz: f64,
    pub window_s: f64,
    /// Stride of the evaluation windows; equal to `window_s` (no overlap).
    pub stride_s: f64,
    /// Stride used for training windows; may be shorter for augmentation.
    pub train_stride_s: f64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        Self {
            target_rate_hz: 30.0,
            window_s: 30.0,
            stride_s: 30.0,
            train_stride_s: 30.0,
        }
    }
}

impl WindowConfig {
    pub fn window_len(&self) -> usize {
        (self.window_s * self.target_rate_hz).round() as usize
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub subject_id: String,
    pub window_index: usize,
    pub start_time_s: f64,
    pub sampling_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl Window {
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowPair {
    pub ppg: Window,
    pub resp: Window,
}

/// Min-max normalization result; `degenerate` marks constant input, which is
/// mapped to all 0.5 instead of dividing by zero.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub samples: Vec<f64>,
    pub degenerate: bool,
}

pub fn normalize_minmax(samples: &[f64]) -> Result<Normalized> {
    if samples.is_empty() {
        return Err(Error::arg("normalize_minmax: empty input"));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("normalize_minmax: non-finite sample"));
    }
    let (lo, hi) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if hi == lo {
        return Ok(Normalized {
            samples: vec![0.5; samples.len()],
            degenerate: true,
        });
    }
    let span = hi - lo;
    Ok(Normalized {
        samples: samples
            .iter()
            .map(|v| ((v - lo) / span).clamp(0.0, 1.0))
            .collect(),
        degenerate: false,
    })
}

/// Anti-aliased rational rate conversion (downsampling or identity only).
/// Output length is `floor(len * to_hz / from_hz)`.
pub fn resample(samples: &[f64], from_hz: f64, to_hz: f64) -> Result<Vec<f64>> {
    if !(to_hz > 0.0 && to_hz.is_finite()) || !(from_hz > 0.0 && from_hz.is_finite()) {
        return Err(Error::arg(format!(
            "resample: rates must be positive (from {from_hz}, to {to_hz})"
        )));
    }
    if to_hz > from_hz {
        return Err(Error::UnsupportedUpsample { from_hz, to_hz });
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("resample: non-finite sample"));
    }
    if to_hz == from_hz {
        return Ok(samples.to_vec());
    }
    let (up, down) = rational_ratio(from_hz, to_hz).ok_or_else(|| {
        Error::arg(format!(
            "resample: ratio {to_hz}/{from_hz} has no small rational form"
        ))
    })?;
    Ok(PolyphaseResampler::new(up, down).process(samples))
}

/// Normalize a raw record to [0, 1] and bring it to the target rate.
pub fn condition_record(record: &SignalRecord, cfg: &WindowConfig) -> Result<SignalRecord> {
    let norm = normalize_minmax(&record.samples)?;
    if norm.degenerate {
        log::warn!(
            "{} {:?}: constant record",
            record.subject_id,
            record.channel
        );
    }
    let samples = resample(&norm.samples, record.sampling_rate_hz, cfg.target_rate_hz)?;
    Ok(SignalRecord {
        subject_id: record.subject_id.clone(),
        channel: record.channel,
        sampling_rate_hz: cfg.target_rate_hz,
        samples,
    })
}

/// Cut `window_s` windows every `stride_s` seconds, each min-max renormalized.
/// A trailing partial window is dropped; a record shorter than one window
/// yields no windows.
pub fn make_windows(record: &SignalRecord, window_s: f64, stride_s: f64) -> Result<Vec<Window>> {
    if !(stride_s > 0.0 && window_s > 0.0) {
        return Err(Error::arg(
            "make_windows: window and stride must be positive",
        ));
    }
    let fs = record.sampling_rate_hz;
    let len = (window_s * fs).round() as usize;
    let step = (stride_s * fs).round() as usize;
    if step == 0 || len == 0 {
        return Err(Error::arg(
            "make_windows: window or stride shorter than one sample",
        ));
    }
    let n = record.samples.len();
    if n < len {
        return Ok(Vec::new());
    }
    (0..=(n - len) / step)
        .map(|k| {
            let start = k * step;
            let norm = normalize_minmax(&record.samples[start..start + len])?;
            Ok(Window {
                subject_id: record.subject_id.clone(),
                window_index: k,
                start_time_s: start as f64 / fs,
                sampling_rate_hz: fs,
                samples: norm.samples,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pairing {
    pub pairs: Vec<WindowPair>,
    pub dropped: usize,
}

/// Zip PPG and respiration windows by index; unmatched windows are dropped
/// and counted.
pub fn make_pairs(ppg: Vec<Window>, resp: Vec<Window>) -> Result<Pairing> {
    let subject = ppg.first().or(resp.first()).map(|w| w.subject_id.clone());
    if let Some(s) = &subject {
        if let Some(w) = ppg.iter().chain(&resp).find(|w| &w.subject_id != s) {
            return Err(Error::arg(format!(
                "make_pairs: subject mismatch ({s} vs {})",
                w.subject_id
            )));
        }
    }
    let total = ppg.len() + resp.len();
    let mut resp_by_idx: std::collections::BTreeMap<usize, Window> =
        resp.into_iter().map(|w| (w.window_index, w)).collect();
    let mut pairs = Vec::new();
    for p in ppg {
        if let Some(r) = resp_by_idx.remove(&p.window_index) {
            if (r.start_time_s - p.start_time_s).abs() > 1e-9 {
                return Err(Error::arg(format!(
                    "make_pairs: window {} starts differ",
                    p.window_index
                )));
            }
            pairs.push(WindowPair { ppg: p, resp: r });
        }
    }
    Ok(Pairing {
        dropped: total - 2 * pairs.len(),
        pairs,
    })
}

/// A subject after preprocessing: the source bundle plus evaluation pairs
/// (non-overlapping) and training pairs (`train_stride_s`).
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedSubject {
    pub bundle: SubjectBundle,
    pub eval_pairs: Vec<WindowPair>,
    pub train_pairs: Vec<WindowPair>,
}

pub fn prepare_subject(bundle: &SubjectBundle, cfg: &WindowConfig) -> Result<PreparedSubject> {
    let ppg = condition_record(&bundle.ppg, cfg)?;
    let resp = condition_record(&bundle.resp, cfg)?;
    debug_assert_eq!(ppg.channel, Channel::Ppg);
    let pairs_at = |stride: f64| -> Result<Vec<WindowPair>> {
        let p = make_pairs(
            make_windows(&ppg, cfg.window_s, stride)?,
            make_windows(&resp, cfg.window_s, stride)?,
        )?;
        if p.dropped > 0 {
            log::warn!(
                "{}: dropped {} unmatched windows",
                bundle.subject_id,
                p.dropped
            );
        }
        Ok(p.pairs)
    };
    let eval_pairs = pairs_at(cfg.stride_s)?;
    let train_pairs = if cfg.train_stride_s == cfg.stride_s {
        eval_pairs.clone()
    } else {
        pairs_at(cfg.train_stride_s)?
    };
    Ok(PreparedSubject {
        bundle: bundle.clone(),
        eval_pairs,
        train_pairs,
    })
}

pub fn prepare_all(
    bundles: &[SubjectBundle],
    cfg: &WindowConfig,
    exec: crate::parallel::ExecMode,
) -> Result<Vec<PreparedSubject>> {
    crate::parallel::try_map(exec, bundles, |b| prepare_subject(b, cfg))
}
