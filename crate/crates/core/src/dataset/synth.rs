//! Synthetic PPG/respiration cohort with exact breath annotations.
//!
//! Respiration is a slightly asymmetric oscillation whose rate drifts slowly
//! around a per-subject baseline. The PPG is a train of two-Gaussian pulses
//! whose baseline, amplitude and beat interval are all modulated by
//! respiration. Annotator A1 marks the sample where the respiratory phase
//! wraps (the rising zero crossing of the inhale); annotator A2 is A1 with a
//! few samples of jitter.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{AnnotatorId, BreathAnnotation, Channel, SignalRecord, SubjectBundle};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthConfig {
    pub subjects: usize,
    pub duration_s: f64,
    pub rate_hz: f64,
    /// Range of per-subject baseline breathing rates, brpm.
    pub rr_range: (f64, f64),
    /// Range of per-subject heart rates, bpm.
    pub hr_range: (f64, f64),
    /// Additive white-noise std on both channels (signal amplitude ~1).
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            subjects: 5,
            duration_s: 480.0,
            rate_hz: 125.0,
            rr_range: (10.0, 24.0),
            hr_range: (60.0, 95.0),
            noise: 0.02,
            seed: 7,
        }
    }
}

fn pulse(phase: f64) -> f64 {
    let g = |c: f64, w: f64| (-((phase - c) / w).powi(2)).exp();
    g(0.25, 0.08) + 0.45 * g(0.55, 0.1)
}

/// Generate subject `index` (ids are `synth_01`, `synth_02`, ...).
pub fn subject(cfg: &SynthConfig, index: usize) -> SubjectBundle {
    let id = format!("synth_{:02}", index + 1);
    let mut rng = ChaCha8Rng::seed_from_u64(
        cfg.seed
            .wrapping_mul(0x9E37_79B9)
            .wrapping_add(index as u64),
    );
    let fs = cfg.rate_hz;
    let n = (cfg.duration_s * fs).round() as usize;
    let noise = Normal::new(0.0, cfg.noise.max(1e-12)).unwrap();

    let rr0 = rng.random_range(cfg.rr_range.0..cfg.rr_range.1) / 60.0;
    let rr_depth = rng.random_range(0.03..0.1);
    let rr_period = rng.random_range(60.0..180.0);
    let rr_phase = rng.random_range(0.0..2.0 * PI);
    let hr0 = rng.random_range(cfg.hr_range.0..cfg.hr_range.1) / 60.0;
    let shape2 = rng.random_range(0.1..0.3);
    let drift_f = rng.random_range(0.005..0.02);
    let ppg_gain = rng.random_range(0.5..2.0);
    let ppg_offset = rng.random_range(-1.0..1.0);
    let imp_gain = rng.random_range(0.3..1.5);

    let mut resp = Vec::with_capacity(n);
    let mut ppg = Vec::with_capacity(n);
    let mut onsets_a1 = Vec::new();
    let mut resp_phase = rng.random_range(0.0..2.0 * PI);
    let mut card_phase = rng.random_range(0.0..1.0);
    for i in 0..n {
        let t = i as f64 / fs;
        let f_resp = rr0 * (1.0 + rr_depth * (2.0 * PI * t / rr_period + rr_phase).sin());
        let prev = resp_phase;
        resp_phase += 2.0 * PI * f_resp / fs;
        if (resp_phase / (2.0 * PI)).floor() > (prev / (2.0 * PI)).floor() {
            onsets_a1.push(t);
        }
        let r = resp_phase.sin() + shape2 * (2.0 * resp_phase).sin();
        let drift = 0.15 * (2.0 * PI * drift_f * t).sin();
        resp.push(imp_gain * (r + drift) + noise.sample(&mut rng));

        // Respiratory sinus arrhythmia on the beat rate.
        let f_card = hr0 * (1.0 + 0.04 * r);
        card_phase = (card_phase + f_card / fs).fract();
        let beat = (1.0 + 0.15 * r) * pulse(card_phase);
        let baseline = 0.35 * r + drift;
        ppg.push(ppg_offset + ppg_gain * (beat + baseline) + noise.sample(&mut rng));
    }

    let duration = n as f64 / fs;
    let jitter: Vec<f64> = onsets_a1
        .iter()
        .map(|&t| {
            let dj = rng.random_range(-3i32..=3) as f64 / fs;
            (t + dj).clamp(0.0, duration - 1.0 / fs)
        })
        .collect();
    let mut onsets_a2: Vec<f64> = Vec::with_capacity(jitter.len());
    for t in jitter {
        if onsets_a2.last().is_none_or(|&l| t > l) {
            onsets_a2.push(t);
        }
    }

    let ann = |who, on| BreathAnnotation {
        subject_id: id.clone(),
        annotator_id: who,
        onset_times_s: on,
    };
    SubjectBundle {
        subject_id: id.clone(),
        ppg: SignalRecord {
            subject_id: id.clone(),
            channel: Channel::Ppg,
            sampling_rate_hz: fs,
            samples: ppg,
        },
        resp: SignalRecord {
            subject_id: id.clone(),
            channel: Channel::RespImpedance,
            sampling_rate_hz: fs,
            samples: resp,
        },
        annotations: vec![
            ann(AnnotatorId::A1, onsets_a1),
            ann(AnnotatorId::A2, onsets_a2),
        ],
        annotation_issue: None,
    }
}

pub fn cohort(cfg: &SynthConfig) -> Vec<SubjectBundle> {
    (0..cfg.subjects).map(|i| subject(cfg, i)).collect()
}
