//! Intermediate per-subject archive.
//!
//! One JSON document per subject, `<dir>/<subject_id>.json`:
//!
//! ```text
//! {
//!   "format": "prt-subject-v1",
//!   "subject_id": "bidmc_01",
//!   "channels": [
//!     { "channel": "PPG",            "rate_hz": 125.0, "samples": [...] },
//!     { "channel": "RESP_IMPEDANCE", "rate_hz": 125.0, "samples": [...] }
//!   ],
//!   "annotations": [ { "annotator_id": "A1", "onset_times_s": [...] }, ... ],
//!   "annotation_issue": null
//! }
//! ```
//!
//! Floats are written in shortest round-trip form, so a save/load cycle
//! reproduces every sample bit for bit.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{AnnotatorId, BreathAnnotation, Channel, SignalRecord, SubjectBundle};

pub const FORMAT_TAG: &str = "prt-subject-v1";

#[derive(Debug, Serialize, Deserialize)]
struct ChannelEntry {
    channel: Channel,
    rate_hz: f64,
    samples: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct AnnotationEntry {
    annotator_id: AnnotatorId,
    onset_times_s: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SubjectFile {
    format: String,
    subject_id: String,
    channels: Vec<ChannelEntry>,
    annotations: Vec<AnnotationEntry>,
    annotation_issue: Option<String>,
}

pub fn subject_path(dir: &Path, subject_id: &str) -> PathBuf {
    dir.join(format!("{subject_id}.json"))
}

pub fn write_subject(dir: &Path, bundle: &SubjectBundle) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let file = SubjectFile {
        format: FORMAT_TAG.to_string(),
        subject_id: bundle.subject_id.clone(),
        channels: [&bundle.ppg, &bundle.resp]
            .into_iter()
            .map(|r| ChannelEntry {
                channel: r.channel,
                rate_hz: r.sampling_rate_hz,
                samples: r.samples.clone(),
            })
            .collect(),
        annotations: bundle
            .annotations
            .iter()
            .map(|a| AnnotationEntry {
                annotator_id: a.annotator_id,
                onset_times_s: a.onset_times_s.clone(),
            })
            .collect(),
        annotation_issue: bundle.annotation_issue.clone(),
    };
    let path = subject_path(dir, &bundle.subject_id);
    let text = serde_json::to_string(&file).expect("archive entry serializes");
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

pub fn read_subject(path: &Path) -> Result<SubjectBundle> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let fmt_err = |reason: String| Error::Format {
        file: path.to_path_buf(),
        reason,
    };
    let file: SubjectFile = serde_json::from_str(&text).map_err(|e| fmt_err(e.to_string()))?;
    if file.format != FORMAT_TAG {
        return Err(fmt_err(format!("unknown archive format {:?}", file.format)));
    }
    let take = |want: Channel| -> Result<SignalRecord> {
        let c = file
            .channels
            .iter()
            .find(|c| c.channel == want)
            .ok_or_else(|| fmt_err(format!("missing {want:?} channel")))?;
        Ok(SignalRecord {
            subject_id: file.subject_id.clone(),
            channel: want,
            sampling_rate_hz: c.rate_hz,
            samples: c.samples.clone(),
        })
    };
    let bundle = SubjectBundle {
        subject_id: file.subject_id.clone(),
        ppg: take(Channel::Ppg)?,
        resp: take(Channel::RespImpedance)?,
        annotations: file
            .annotations
            .iter()
            .map(|a| BreathAnnotation {
                subject_id: file.subject_id.clone(),
                annotator_id: a.annotator_id,
                onset_times_s: a.onset_times_s.clone(),
            })
            .collect(),
        annotation_issue: file.annotation_issue.clone(),
    };
    bundle.validate().map_err(|e| fmt_err(e.to_string()))?;
    Ok(bundle)
}

pub fn write_all(dir: &Path, bundles: &[SubjectBundle]) -> Result<Vec<PathBuf>> {
    bundles.iter().map(|b| write_subject(dir, b)).collect()
}

/// Read every `*.json` archive entry in `dir`, sorted by subject id.
pub fn read_all(dir: &Path) -> Result<Vec<SubjectBundle>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out: Vec<SubjectBundle> = paths
        .iter()
        .map(|p| read_subject(p))
        .collect::<Result<_>>()?;
    out.sort_by(|a, b| a.subject_id.cmp(&b.subject_id));
    Ok(out)
}
