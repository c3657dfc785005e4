//! Signal-processing primitives shared by preprocessing and RR estimation.

pub mod filter;
pub mod resample;
pub mod spectrum;

pub fn mean(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().sum::<f64>() / x.len() as f64
}

/// Population standard deviation.
pub fn std_dev(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64).sqrt()
}

/// Remove the least-squares line from `x` in place. Returns the fitted slope
/// (per sample).
pub fn detrend_linear(x: &mut [f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        if n == 1 {
            x[0] = 0.0;
        }
        return 0.0;
    }
    let nf = n as f64;
    let t_mean = (nf - 1.0) / 2.0;
    let x_mean = mean(x);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in x.iter().enumerate() {
        let dt = i as f64 - t_mean;
        sxy += dt * (v - x_mean);
        sxx += dt * dt;
    }
    let slope = sxy / sxx;
    for (i, v) in x.iter_mut().enumerate() {
        *v -= x_mean + slope * (i as f64 - t_mean);
    }
    slope
}

/// Centered moving average over `width` samples (forced odd). The window
/// shrinks at the edges instead of zero-padding.
pub fn moving_average(x: &[f64], width: usize) -> Vec<f64> {
    let half = width.max(1) / 2;
    let n = x.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for v in x {
        acc += v;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}
