//! Butterworth biquad cascades and zero-phase (forward-backward) filtering.

use std::f64::consts::PI;

/// Normalized biquad, `a0 == 1`, run in transposed direct form II.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn dc_gain(&self) -> f64 {
        (self.b[0] + self.b[1] + self.b[2]) / (1.0 + self.a[0] + self.a[1])
    }

    /// Filter state for a constant input `x` already at steady state.
    fn steady_state(&self, x: f64) -> [f64; 2] {
        let y = self.dc_gain() * x;
        let z2 = self.b[2] * x - self.a[1] * y;
        let z1 = self.b[1] * x - self.a[0] * y + z2;
        [z1, z2]
    }

    fn run(&self, x: &mut [f64]) {
        let Some(&first) = x.first() else { return };
        let [mut z1, mut z2] = self.steady_state(first);
        for v in x.iter_mut() {
            let input = *v;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *v = y;
        }
    }

    /// Magnitude response at `f` Hz for sampling rate `fs`.
    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let (c1, s1) = (w.cos(), -w.sin());
        let (c2, s2) = ((2.0 * w).cos(), -(2.0 * w).sin());
        let num = (
            self.b[0] + self.b[1] * c1 + self.b[2] * c2,
            self.b[1] * s1 + self.b[2] * s2,
        );
        let den = (
            1.0 + self.a[0] * c1 + self.a[1] * c2,
            self.a[0] * s1 + self.a[1] * s2,
        );
        (num.0.hypot(num.1)) / (den.0.hypot(den.1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Low,
    High,
}

fn butterworth_sections(kind: Kind, order: usize, cutoff_hz: f64, fs: f64) -> Vec<Biquad> {
    assert!(
        order >= 2 && order.is_multiple_of(2),
        "Butterworth order must be even"
    );
    assert!(
        cutoff_hz > 0.0 && cutoff_hz < fs / 2.0,
        "cutoff must be below Nyquist"
    );
    let w0 = 2.0 * PI * cutoff_hz / fs;
    let (sin_w, cos_w) = w0.sin_cos();
    (0..order / 2)
        .map(|k| {
            let q = 1.0 / (2.0 * (PI * (2 * k + 1) as f64 / (2 * order) as f64).cos());
            let alpha = sin_w / (2.0 * q);
            let a0 = 1.0 + alpha;
            let b = match kind {
                Kind::Low => [(1.0 - cos_w) / 2.0, 1.0 - cos_w, (1.0 - cos_w) / 2.0],
                Kind::High => [(1.0 + cos_w) / 2.0, -(1.0 + cos_w), (1.0 + cos_w) / 2.0],
            };
            Biquad {
                b: [b[0] / a0, b[1] / a0, b[2] / a0],
                a: [-2.0 * cos_w / a0, (1.0 - alpha) / a0],
            }
        })
        .collect()
}

/// Cascade of second-order sections.
#[derive(Debug, Clone, PartialEq)]
pub struct SosFilter {
    pub sections: Vec<Biquad>,
}

impl SosFilter {
    pub fn butter_lowpass(order: usize, cutoff_hz: f64, fs: f64) -> Self {
        Self {
            sections: butterworth_sections(Kind::Low, order, cutoff_hz, fs),
        }
    }

    pub fn butter_highpass(order: usize, cutoff_hz: f64, fs: f64) -> Self {
        Self {
            sections: butterworth_sections(Kind::High, order, cutoff_hz, fs),
        }
    }

    /// High-pass at `lo_hz` cascaded with low-pass at `hi_hz`.
    pub fn butter_bandpass(order: usize, lo_hz: f64, hi_hz: f64, fs: f64) -> Self {
        let mut sections = butterworth_sections(Kind::High, order, lo_hz, fs);
        sections.extend(butterworth_sections(Kind::Low, order, hi_hz, fs));
        Self { sections }
    }

    pub fn magnitude(&self, f: f64, fs: f64) -> f64 {
        self.sections.iter().map(|s| s.magnitude(f, fs)).product()
    }

    /// Causal single pass, starting from steady state on the first sample.
    pub fn apply(&self, x: &mut [f64]) {
        for s in &self.sections {
            s.run(x);
        }
    }

    /// Zero-phase forward-backward filtering with odd-reflection padding of
    /// `pad` samples at both ends (clamped to `len - 1`).
    pub fn filtfilt(&self, x: &[f64], pad: usize) -> Vec<f64> {
        let n = x.len();
        if n == 0 {
            return Vec::new();
        }
        let pad = pad.min(n - 1);
        let mut ext = Vec::with_capacity(n + 2 * pad);
        let (first, last) = (x[0], x[n - 1]);
        ext.extend((1..=pad).rev().map(|i| 2.0 * first - x[i]));
        ext.extend_from_slice(x);
        ext.extend((1..=pad).map(|i| 2.0 * last - x[n - 1 - i]));
        self.apply(&mut ext);
        ext.reverse();
        self.apply(&mut ext);
        ext.reverse();
        ext[pad..pad + n].to_vec()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn butterworth_is_minus_3db_at_cutoff() {
        let fs = 30.0;
        for order in [2, 4, 6] {
            let lp = SosFilter::butter_lowpass(order, 0.8, fs);
            let hp = SosFilter::butter_highpass(order, 0.1, fs);
            let half_power = std::f64::consts::FRAC_1_SQRT_2;
            assert!((lp.magnitude(0.8, fs) - half_power).abs() < 1e-9);
            assert!((hp.magnitude(0.1, fs) - half_power).abs() < 1e-9);
            assert!((lp.magnitude(0.0, fs) - 1.0).abs() < 1e-12);
            assert!(hp.magnitude(0.0, fs).abs() < 1e-12);
        }
    }

    #[test]
    fn filtfilt_passes_constants_through_lowpass() {
        let lp = SosFilter::butter_lowpass(4, 0.8, 30.0);
        let y = lp.filtfilt(&vec![3.0; 400], 100);
        assert!(y.iter().all(|v| (v - 3.0).abs() < 1e-9));
    }

    #[test]
    fn filtfilt_is_zero_phase() {
        let fs = 30.0;
        let f = 0.3;
        let x: Vec<f64> = (0..1800)
            .map(|i| (2.0 * PI * f * i as f64 / fs).sin())
            .collect();
        let bp = SosFilter::butter_bandpass(2, 0.1, 0.8, fs);
        let y = bp.filtfilt(&x, 300);
        // Compare phase in the middle of the record via correlation with sin/cos.
        let (mut s, mut c) = (0.0, 0.0);
        for (i, v) in y.iter().enumerate().take(1200).skip(600) {
            let ph = 2.0 * PI * f * i as f64 / fs;
            s += v * ph.sin();
            c += v * ph.cos();
        }
        assert!((c / s).abs() < 0.01, "phase leak {}", c / s);
        let gain = bp.magnitude(f, fs).powi(2);
        assert!(((s / 300.0) - gain).abs() < 0.01);
    }
}
