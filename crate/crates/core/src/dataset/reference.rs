use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::respmetrics::{estimate_rr_count, RespConfig};

use super::{AnnotatorId, SubjectBundle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSource {
    /// Annotator A1 alone.
    AnnotatorA1,
    /// Mean of both annotators' counts.
    AnnotatorMean,
    /// Annotator A2 alone (A1 absent).
    AnnotatorA2,
    /// Breath-count estimator on the impedance channel.
    ImpedanceEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRate {
    pub brpm: f64,
    pub source: ReferenceSource,
    /// No annotated breaths in the segment, or the impedance fallback found none.
    pub low_confidence: bool,
}

/// Reference breaths/min over `[start_s, start_s + len_s)`.
///
/// With annotations the rate is `count * 60 / len_s`, averaging the two
/// annotators' counts when both are present. Without annotations the
/// breath-count estimator runs on the impedance waveform.
pub fn reference_rr(
    bundle: &SubjectBundle,
    start_s: f64,
    len_s: f64,
    cfg: &RespConfig,
) -> Result<ReferenceRate> {
    let duration = bundle.duration_s();
    if !(start_s >= 0.0 && len_s > 0.0 && start_s + len_s <= duration + 1e-9) {
        return Err(Error::Range(format!(
            "{}: segment [{start_s}, {}) outside recording of {duration} s",
            bundle.subject_id,
            start_s + len_s
        )));
    }
    let per_min = 60.0 / len_s;
    let a1 = bundle.annotation(AnnotatorId::A1);
    let a2 = bundle.annotation(AnnotatorId::A2);
    let (count, source) = match (a1, a2) {
        (Some(a), Some(b)) => (
            (a.count_in(start_s, len_s) + b.count_in(start_s, len_s)) as f64 / 2.0,
            ReferenceSource::AnnotatorMean,
        ),
        (Some(a), None) => (
            a.count_in(start_s, len_s) as f64,
            ReferenceSource::AnnotatorA1,
        ),
        (None, Some(b)) => (
            b.count_in(start_s, len_s) as f64,
            ReferenceSource::AnnotatorA2,
        ),
        (None, None) => {
            let fs = bundle.resp.sampling_rate_hz;
            let lo = (start_s * fs).round() as usize;
            let hi = ((start_s + len_s) * fs).round() as usize;
            let seg = &bundle.resp.samples[lo..hi.min(bundle.resp.samples.len())];
            let est = estimate_rr_count(seg, fs, cfg)?;
            return Ok(ReferenceRate {
                brpm: est.rate_brpm,
                source: ReferenceSource::ImpedanceEstimate,
                low_confidence: est.breath_count == 0,
            });
        }
    };
    Ok(ReferenceRate {
        brpm: count * per_min,
        source,
        low_confidence: count == 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{BreathAnnotation, Channel, SignalRecord};

    fn bundle(resp: Vec<f64>, fs: f64, anns: Vec<(AnnotatorId, Vec<f64>)>) -> SubjectBundle {
        let n = resp.len();
        SubjectBundle {
            subject_id: "s".into(),
            ppg: SignalRecord::new("s", Channel::Ppg, fs, vec![0.0; n]).unwrap(),
            resp: SignalRecord::new("s", Channel::RespImpedance, fs, resp).unwrap(),
            annotations: anns
                .into_iter()
                .map(|(who, on)| BreathAnnotation {
                    subject_id: "s".into(),
                    annotator_id: who,
                    onset_times_s: on,
                })
                .collect(),
            annotation_issue: None,
        }
    }

    #[test]
    fn counts_per_minute() {
        let on: Vec<f64> = (0..15).map(|i| 1.0 + 4.0 * i as f64).collect();
        let b = bundle(vec![0.0; 125 * 120], 125.0, vec![(AnnotatorId::A1, on)]);
        let r = reference_rr(&b, 0.0, 60.0, &RespConfig::default()).unwrap();
        assert_eq!(r.brpm, 15.0);
        assert_eq!(r.source, ReferenceSource::AnnotatorA1);
        let r = reference_rr(&b, 60.0, 60.0, &RespConfig::default()).unwrap();
        assert_eq!(r.brpm, 0.0);
        assert!(r.low_confidence);
    }

    #[test]
    fn scales_short_segments() {
        let on: Vec<f64> = (0..8).map(|i| 0.5 + 3.5 * i as f64).collect();
        let b = bundle(vec![0.0; 125 * 60], 125.0, vec![(AnnotatorId::A1, on)]);
        let r = reference_rr(&b, 0.0, 30.0, &RespConfig::default()).unwrap();
        assert_eq!(r.brpm, 16.0);
    }

    #[test]
    fn averages_two_annotators() {
        let a: Vec<f64> = (0..15).map(|i| 4.0 * i as f64).collect();
        let b2: Vec<f64> = (0..16).map(|i| 3.7 * i as f64).collect();
        let b = bundle(
            vec![0.0; 125 * 60],
            125.0,
            vec![(AnnotatorId::A1, a), (AnnotatorId::A2, b2)],
        );
        let r = reference_rr(&b, 0.0, 60.0, &RespConfig::default()).unwrap();
        assert_eq!(r.brpm, 15.5);
        assert_eq!(r.source, ReferenceSource::AnnotatorMean);
    }

    #[test]
    fn falls_back_to_impedance() {
        let fs = 125.0;
        let resp: Vec<f64> = (0..(fs * 60.0) as usize)
            .map(|i| (2.0 * std::f64::consts::PI * 0.25 * i as f64 / fs).sin())
            .collect();
        let b = bundle(resp, fs, vec![]);
        let r = reference_rr(&b, 0.0, 60.0, &RespConfig::default()).unwrap();
        assert!((r.brpm - 15.0).abs() <= 0.5, "{r:?}");
        assert_eq!(r.source, ReferenceSource::ImpedanceEstimate);
        assert!(!r.low_confidence);
    }

    #[test]
    fn flat_impedance_is_low_confidence_not_error() {
        let b = bundle(vec![0.1; 125 * 60], 125.0, vec![]);
        let r = reference_rr(&b, 0.0, 60.0, &RespConfig::default()).unwrap();
        assert!(r.low_confidence);
        assert_eq!(r.brpm, 0.0);
    }

    #[test]
    fn outside_recording_is_range_error() {
        let b = bundle(
            vec![0.0; 125 * 60],
            125.0,
            vec![(AnnotatorId::A1, vec![1.0])],
        );
        let cfg = RespConfig::default();
        assert!(matches!(
            reference_rr(&b, 30.0, 60.0, &cfg),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            reference_rr(&b, -1.0, 10.0, &cfg),
            Err(Error::Range(_))
        ));
    }
}
