#![allow(dead_code)]

use prt_core::dataset::synth::{cohort, SynthConfig};
use prt_core::preprocess::{prepare_all, PreparedSubject, Window, WindowConfig, WindowPair};

pub fn synth_subjects(n: usize, duration_s: f64) -> Vec<PreparedSubject> {
    let cfg = SynthConfig {
        subjects: n,
        duration_s,
        ..SynthConfig::default()
    };
    prepare_all(&cohort(&cfg), &WindowConfig::default(), Default::default()).unwrap()
}

pub fn train_pairs(subjects: &[PreparedSubject]) -> Vec<WindowPair> {
    subjects
        .iter()
        .flat_map(|s| s.train_pairs.iter().cloned())
        .collect()
}

pub fn window(subject: &str, index: usize, fs: f64, samples: Vec<f64>) -> Window {
    Window {
        subject_id: subject.into(),
        window_index: index,
        start_time_s: index as f64 * samples.len() as f64 / fs,
        sampling_rate_hz: fs,
        samples,
    }
}

pub fn tone(freq_hz: f64, fs: f64, n: usize, phase: f64) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 + 0.5 * (2.0 * std::f64::consts::PI * freq_hz * i as f64 / fs + phase).sin())
        .collect()
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let d = a.abs().max(b.abs());
    if d == 0.0 {
        0.0
    } else {
        (a - b).abs() / d
    }
}
