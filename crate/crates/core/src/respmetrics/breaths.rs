use crate::dsp;

use super::{CleanedRespSignal, RespConfig};

/// Local maxima of `x` (plateaus resolved to their middle sample), thinned so
/// that no two survivors are closer than `min_distance` samples (taller peaks
/// win), then filtered by `min_prominence`.
pub fn detect_peaks(x: &[f64], min_distance: usize, min_prominence: f64) -> Vec<usize> {
    let n = x.len();
    let mut peaks = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if x[i - 1] < x[i] {
            let mut ahead = i + 1;
            while ahead + 1 < n && x[ahead] == x[i] {
                ahead += 1;
            }
            if x[ahead] < x[i] {
                peaks.push((i + ahead - 1) / 2);
                i = ahead;
            }
        }
        i += 1;
    }

    if min_distance > 1 && peaks.len() > 1 {
        let mut order: Vec<usize> = (0..peaks.len()).collect();
        order.sort_by(|&a, &b| x[peaks[b]].total_cmp(&x[peaks[a]]).then(a.cmp(&b)));
        let mut keep = vec![true; peaks.len()];
        for &k in &order {
            if !keep[k] {
                continue;
            }
            let p = peaks[k];
            for j in (0..k).rev() {
                if p - peaks[j] >= min_distance {
                    break;
                }
                keep[j] = false;
            }
            for j in k + 1..peaks.len() {
                if peaks[j] - p >= min_distance {
                    break;
                }
                keep[j] = false;
            }
        }
        peaks = peaks
            .into_iter()
            .zip(keep)
            .filter_map(|(p, k)| k.then_some(p))
            .collect();
    }

    peaks
        .into_iter()
        .filter(|&p| {
            let prom = prominence(x, p);
            prom > 0.0 && prom >= min_prominence
        })
        .collect()
}

fn prominence(x: &[f64], p: usize) -> f64 {
    let h = x[p];
    let mut left_min = h;
    for i in (0..p).rev() {
        if x[i] > h {
            break;
        }
        left_min = left_min.min(x[i]);
    }
    let mut right_min = h;
    for &v in &x[p + 1..] {
        if v > h {
            break;
        }
        right_min = right_min.min(v);
    }
    h - left_min.max(right_min)
}

/// Breath onset times in seconds, strictly increasing.
///
/// Breaths are peaks with prominence of at least `prominence_frac * std` and
/// spacing of at least `min_spacing_s`. Each onset is the last upward zero
/// crossing before its peak (linearly interpolated); if the rising phase never
/// crosses zero since the previous peak, the trough between the two is used.
pub fn detect_breaths(cleaned: &CleanedRespSignal, cfg: &RespConfig) -> Vec<f64> {
    let x = &cleaned.samples;
    let fs = cleaned.sampling_rate_hz;
    let sd = dsp::std_dev(x);
    if x.len() < 3 || sd == 0.0 {
        return Vec::new();
    }
    let min_distance = (cfg.min_spacing_s * fs).ceil() as usize;
    let peaks = detect_peaks(x, min_distance, cfg.prominence_frac * sd);

    let mut onsets = Vec::with_capacity(peaks.len());
    let mut floor = 0usize;
    for &p in &peaks {
        let mut onset = None;
        let mut j = p;
        while j > floor {
            if x[j - 1] < 0.0 && x[j] >= 0.0 {
                let frac = -x[j - 1] / (x[j] - x[j - 1]);
                onset = Some((j - 1) as f64 + frac);
                break;
            }
            j -= 1;
        }
        let idx = onset.unwrap_or_else(|| {
            let (argmin, _) =
                x[floor..=p]
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |a, (i, &v)| if v < a.1 { (i, v) } else { a },
                    );
            (floor + argmin) as f64
        });
        let t = idx / fs;
        if onsets.last().is_none_or(|&last| t > last) {
            onsets.push(t);
        }
        floor = p;
    }
    onsets
}
