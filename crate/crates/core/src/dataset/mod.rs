//! Recording and annotation model for the BIDMC PPG/respiration corpus.
//!
//! [`load_bidmc`] reads the published CSV layout, [`archive`] persists the
//! normalized per-subject records so later stages never touch raw CSV, and
//! [`reference_rr`] turns annotations into per-segment breaths/min.

pub mod archive;
mod bidmc;
mod reference;
pub mod synth;

pub use bidmc::{load_bidmc, write_bidmc_subject, LoadOptions};
pub use reference::{reference_rr, ReferenceRate, ReferenceSource};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Channel {
    Ppg,
    RespImpedance,
}

/// One subject's single-channel waveform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalRecord {
    pub subject_id: String,
    pub channel: Channel,
    pub sampling_rate_hz: f64,
    pub samples: Vec<f64>,
}

impl SignalRecord {
    pub fn new(
        subject_id: impl Into<String>,
        channel: Channel,
        sampling_rate_hz: f64,
        samples: Vec<f64>,
    ) -> Result<Self> {
        let rec = Self {
            subject_id: subject_id.into(),
            channel,
            sampling_rate_hz,
            samples,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sampling_rate_hz.is_finite() && self.sampling_rate_hz > 0.0) {
            return Err(Error::arg(format!(
                "{}: sampling rate must be positive, got {}",
                self.subject_id, self.sampling_rate_hz
            )));
        }
        if self.samples.is_empty() {
            return Err(Error::arg(format!(
                "{}: empty {:?} record",
                self.subject_id, self.channel
            )));
        }
        if let Some(i) = self.samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::arg(format!(
                "{}: non-finite {:?} sample at index {i}",
                self.subject_id, self.channel
            )));
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.sampling_rate_hz
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AnnotatorId {
    A1,
    A2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreathAnnotation {
    pub subject_id: String,
    pub annotator_id: AnnotatorId,
    /// Strictly increasing onset times, seconds from recording start.
    pub onset_times_s: Vec<f64>,
}

impl BreathAnnotation {
    pub fn validate(&self, duration_s: f64) -> Result<()> {
        let on = &self.onset_times_s;
        if on.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::arg(format!(
                "{} {:?}: onsets not strictly increasing",
                self.subject_id, self.annotator_id
            )));
        }
        if on
            .iter()
            .any(|t| !(t.is_finite() && *t >= 0.0 && *t <= duration_s))
        {
            return Err(Error::arg(format!(
                "{} {:?}: onset outside recording of {duration_s} s",
                self.subject_id, self.annotator_id
            )));
        }
        Ok(())
    }

    /// Onsets in `[start_s, start_s + len_s)`.
    pub fn count_in(&self, start_s: f64, len_s: f64) -> usize {
        let end = start_s + len_s;
        self.onset_times_s
            .iter()
            .filter(|&&t| t >= start_s && t < end)
            .count()
    }
}

/// Everything known about one subject.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectBundle {
    pub subject_id: String,
    pub ppg: SignalRecord,
    pub resp: SignalRecord,
    pub annotations: Vec<BreathAnnotation>,
    /// Set when an annotation file existed but could not be used; such
    /// subjects still train but are left out of MAE evaluation.
    #[serde(default)]
    pub annotation_issue: Option<String>,
}

impl SubjectBundle {
    /// Checks channel tags, record validity and that both waveforms span the
    /// same interval to within one 125 Hz sample period.
    pub fn validate(&self) -> Result<()> {
        self.ppg.validate()?;
        self.resp.validate()?;
        if self.ppg.channel != Channel::Ppg || self.resp.channel != Channel::RespImpedance {
            return Err(Error::arg(format!(
                "{}: channels mis-tagged",
                self.subject_id
            )));
        }
        let gap = (self.ppg.duration_s() - self.resp.duration_s()).abs();
        if gap >= 1.0 / 125.0 {
            return Err(Error::arg(format!(
                "{}: PPG and respiration durations differ by {gap} s",
                self.subject_id
            )));
        }
        for a in &self.annotations {
            a.validate(self.duration_s())?;
        }
        Ok(())
    }

    pub fn duration_s(&self) -> f64 {
        self.ppg.duration_s().min(self.resp.duration_s())
    }

    pub fn annotation(&self, who: AnnotatorId) -> Option<&BreathAnnotation> {
        self.annotations.iter().find(|a| a.annotator_id == who)
    }

    /// Usable for MAE evaluation: annotation file readable.
    pub fn evaluable(&self) -> bool {
        self.annotation_issue.is_none()
    }
}
