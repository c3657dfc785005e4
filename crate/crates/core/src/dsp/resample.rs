//! Rational polyphase resampling with a Kaiser-windowed sinc anti-aliasing
//! filter.

use std::f64::consts::PI;

/// Reduced `up / down` pair approximating `to_hz / from_hz`.
///
/// Returns `None` when no fraction with denominator up to 10 000 matches the
/// ratio to 1e-9 relative error.
pub fn rational_ratio(from_hz: f64, to_hz: f64) -> Option<(usize, usize)> {
    let target = to_hz / from_hz;
    // Continued-fraction convergents.
    let (mut h0, mut h1) = (0u64, 1u64);
    let (mut k0, mut k1) = (1u64, 0u64);
    let mut x = target;
    for _ in 0..64 {
        let a = x.floor();
        let ai = a as u64;
        let h2 = ai.checked_mul(h1)?.checked_add(h0)?;
        let k2 = ai.checked_mul(k1)?.checked_add(k0)?;
        if k2 > 10_000 {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if ((h1 as f64 / k1 as f64) - target).abs() <= 1e-9 * target {
            return Some((h1 as usize, k1 as usize));
        }
        let frac = x - a;
        if frac < 1e-15 {
            break;
        }
        x = 1.0 / frac;
    }
    None
}

fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let q = x * x / 4.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term < sum * 1e-17 {
            break;
        }
    }
    sum
}

/// Kaiser-windowed low-pass FIR with `cutoff` in cycles/sample (0 < cutoff < 0.5).
pub fn kaiser_lowpass(num_taps: usize, cutoff: f64, beta: f64) -> Vec<f64> {
    let m = (num_taps - 1) as f64;
    let denom = bessel_i0(beta);
    (0..num_taps)
        .map(|i| {
            let t = i as f64 - m / 2.0;
            let sinc = if t == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * t).sin() / (PI * t)
            };
            let r = if m == 0.0 {
                0.0
            } else {
                2.0 * i as f64 / m - 1.0
            };
            let w = bessel_i0(beta * (1.0 - r * r).max(0.0).sqrt()) / denom;
            sinc * w
        })
        .collect()
}

/// Polyphase resampler for a fixed `up / down` ratio.
#[derive(Debug, Clone)]
pub struct PolyphaseResampler {
    up: usize,
    down: usize,
    taps: Vec<f64>,
}

impl PolyphaseResampler {
    /// Filter with `10 * max(up, down)` taps per side and Kaiser beta 5.
    pub fn new(up: usize, down: usize) -> Self {
        let max_rate = up.max(down);
        let half_len = 10 * max_rate;
        let num_taps = 2 * half_len + 1;
        let cutoff = 0.5 / max_rate as f64;
        let mut taps = kaiser_lowpass(num_taps, cutoff, 5.0);
        // Normalize each polyphase branch to unit DC gain so constants map
        // to the same constant exactly.
        for phase in 0..up {
            let s: f64 = taps.iter().skip(phase).step_by(up).sum();
            if s != 0.0 {
                taps.iter_mut()
                    .skip(phase)
                    .step_by(up)
                    .for_each(|t| *t /= s);
            }
        }
        Self { up, down, taps }
    }

    pub fn ratio(&self) -> (usize, usize) {
        (self.up, self.down)
    }

    pub fn output_len(&self, input_len: usize) -> usize {
        input_len * self.up / self.down
    }

    /// Resample `x`, reflecting the signal about its end points to avoid edge
    /// droop.
    pub fn process(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        let out_len = self.output_len(n);
        if n == 0 {
            return Vec::new();
        }
        let half = (self.taps.len() - 1) / 2;
        let at = |i: i64| -> f64 {
            if n == 1 {
                return x[0];
            }
            let period = 2 * (n as i64 - 1);
            let mut j = i.rem_euclid(period);
            if j >= n as i64 {
                j = period - j;
            }
            x[j as usize]
        };
        let up = self.up as i64;
        (0..out_len)
            .map(|k| {
                // Position in the zero-stuffed upsampled stream.
                let center = (k * self.down + half) as i64;
                let first_tap = center.rem_euclid(up);
                let mut acc = 0.0;
                let mut j = first_tap;
                while (j as usize) < self.taps.len() {
                    let m = center - j;
                    acc += self.taps[j as usize] * at(m.div_euclid(up));
                    j += up;
                }
                acc
            })
            .collect()
    }
}
