use crate::dsp::{self, filter::SosFilter};
use crate::error::{Error, Result};

use super::{check_length, CleanedRespSignal, CleaningStep, RespConfig};

/// Linear detrend, zero-phase Butterworth band-pass and short moving-average
/// smoothing. The result is re-centred so its mean is zero.
pub fn denoise(samples: &[f64], fs: f64, cfg: &RespConfig) -> Result<CleanedRespSignal> {
    let (lo, hi) = cfg.band_hz;
    if !(fs > 2.0 * hi) {
        return Err(Error::arg(format!(
            "denoise: sampling rate {fs} Hz must exceed twice the band edge {hi} Hz"
        )));
    }
    check_length(samples, fs, cfg.min_denoise_s, "denoise")?;

    let mut x = samples.to_vec();
    dsp::detrend_linear(&mut x);

    let bp = SosFilter::butter_bandpass(cfg.filter_order, lo, hi, fs);
    let pad = (3.0 / lo * fs).ceil() as usize;
    let x = bp.filtfilt(&x, pad);

    let width = ((cfg.smoothing_s * fs).round() as usize).max(1) | 1;
    let mut x = dsp::moving_average(&x, width);

    let m = dsp::mean(&x);
    x.iter_mut().for_each(|v| *v -= m);

    Ok(CleanedRespSignal {
        samples: x,
        sampling_rate_hz: fs,
        preprocessing_applied: vec![
            CleaningStep::Detrend,
            CleaningStep::BandPass,
            CleaningStep::Smooth,
            CleaningStep::Demean,
        ],
    })
}
