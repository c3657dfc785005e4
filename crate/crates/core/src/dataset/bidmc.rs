use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::parallel::{self, ExecMode};

use super::{AnnotatorId, BreathAnnotation, Channel, SignalRecord, SubjectBundle};

const SIGNALS_SUFFIX: &str = "_Signals.csv";
const BREATHS_SUFFIX: &str = "_Breaths.csv";

#[derive(Debug, Clone, Copy)]
pub struct LoadOptions {
    /// Sampling rate the time column must match.
    pub expected_rate_hz: f64,
    /// Relative tolerance on the inferred rate.
    pub rate_tolerance: f64,
    pub exec: ExecMode,
}

impl Default for LoadOptions {
    fn default() -> Self {
        Self {
            expected_rate_hz: 125.0,
            rate_tolerance: 0.005,
            exec: ExecMode::Parallel,
        }
    }
}

fn norm_header(h: &str) -> String {
    h.trim().to_ascii_lowercase()
}

/// Load every `<id>_Signals.csv` under `root` (with its optional
/// `<id>_Breaths.csv`), sorted by subject id.
pub fn load_bidmc(root: &Path, opts: &LoadOptions) -> Result<Vec<SubjectBundle>> {
    let entries = std::fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut ids = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let name = entry.file_name();
        if let Some(id) = name.to_str().and_then(|n| n.strip_suffix(SIGNALS_SUFFIX)) {
            ids.push(id.to_string());
        }
    }
    ids.sort();
    if ids.is_empty() {
        return Err(Error::Format {
            file: root.to_path_buf(),
            reason: format!("no *{SIGNALS_SUFFIX} files found"),
        });
    }
    parallel::try_map(opts.exec, &ids, |id| load_subject(root, id, opts))
}

fn load_subject(root: &Path, id: &str, opts: &LoadOptions) -> Result<SubjectBundle> {
    let sig_path = root.join(format!("{id}{SIGNALS_SUFFIX}"));
    let (rate, ppg, resp) = read_signals(id, &sig_path, opts)?;
    let ppg = SignalRecord {
        subject_id: id.to_string(),
        channel: Channel::Ppg,
        sampling_rate_hz: rate,
        samples: ppg,
    };
    let resp = SignalRecord {
        subject_id: id.to_string(),
        channel: Channel::RespImpedance,
        sampling_rate_hz: rate,
        samples: resp,
    };
    let duration = ppg.duration_s();

    let breaths_path = root.join(format!("{id}{BREATHS_SUFFIX}"));
    let (annotations, annotation_issue) = if breaths_path.exists() {
        match read_breaths(id, &breaths_path, rate, duration) {
            Ok(a) => (a, None),
            Err(reason) => {
                log::warn!(
                    "{id}: unusable annotations in {}: {reason}",
                    breaths_path.display()
                );
                (Vec::new(), Some(reason))
            }
        }
    } else {
        (Vec::new(), None)
    };

    let bundle = SubjectBundle {
        subject_id: id.to_string(),
        ppg,
        resp,
        annotations,
        annotation_issue,
    };
    bundle
        .validate()
        .map_err(|e| load_err(id, &sig_path, e.to_string()))?;
    Ok(bundle)
}

fn load_err(id: &str, file: &Path, reason: impl Into<String>) -> Error {
    Error::Load {
        subject: id.to_string(),
        file: file.to_path_buf(),
        reason: reason.into(),
    }
}

fn read_signals(id: &str, path: &Path, opts: &LoadOptions) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| load_err(id, path, e.to_string()))?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| load_err(id, path, e.to_string()))?
        .iter()
        .map(norm_header)
        .collect();
    let col = |pred: &dyn Fn(&str) -> bool, what: &str| {
        headers
            .iter()
            .position(|h| pred(h))
            .ok_or_else(|| load_err(id, path, format!("missing {what} column")))
    };
    let t_col = col(&|h| h.starts_with("time"), "time")?;
    let ppg_col = col(&|h| h == "pleth", "PLETH")?;
    let resp_col = col(&|h| h == "resp", "RESP")?;

    let (mut t, mut ppg, mut resp) = (Vec::new(), Vec::new(), Vec::new());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| load_err(id, path, e.to_string()))?;
        let field = |c: usize| -> Result<f64> {
            let s = rec.get(c).unwrap_or("");
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| load_err(id, path, format!("row {}: bad value {s:?}", row + 2)))
        };
        t.push(field(t_col)?);
        ppg.push(field(ppg_col)?);
        resp.push(field(resp_col)?);
    }
    if t.len() < 2 {
        return Err(load_err(id, path, "fewer than two samples"));
    }
    let rate = infer_rate(&t).ok_or_else(|| load_err(id, path, "time column not increasing"))?;
    if ((rate - opts.expected_rate_hz) / opts.expected_rate_hz).abs() > opts.rate_tolerance {
        return Err(Error::Format {
            file: path.to_path_buf(),
            reason: format!(
                "{id}: sampling rate {rate:.3} Hz does not match expected {} Hz",
                opts.expected_rate_hz
            ),
        });
    }
    Ok((opts.expected_rate_hz, ppg, resp))
}

/// Rate from the median time step.
fn infer_rate(t: &[f64]) -> Option<f64> {
    let mut dt: Vec<f64> = t.windows(2).map(|w| w[1] - w[0]).collect();
    dt.sort_by(f64::total_cmp);
    let med = dt[dt.len() / 2];
    (med > 0.0).then(|| 1.0 / med)
}

/// Annotation indices are 1-based sample numbers at the signal rate. Blank
/// and `NaN` cells are skipped (the second annotator's column is often
/// shorter).
fn read_breaths(
    id: &str,
    path: &Path,
    rate: f64,
    duration: f64,
) -> std::result::Result<Vec<BreathAnnotation>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| e.to_string())?;
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| e.to_string())?
        .iter()
        .map(norm_header)
        .collect();
    let cols: Vec<(usize, AnnotatorId)> = headers
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            if h.ends_with("ann1") {
                Some((i, AnnotatorId::A1))
            } else if h.ends_with("ann2") {
                Some((i, AnnotatorId::A2))
            } else {
                None
            }
        })
        .collect();
    if cols.is_empty() {
        return Err("no annotator columns".into());
    }
    let mut onsets: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        for (k, &(c, _)) in cols.iter().enumerate() {
            let s = rec.get(c).unwrap_or("");
            if s.is_empty() || s.eq_ignore_ascii_case("nan") {
                continue;
            }
            let idx: f64 = s
                .parse()
                .map_err(|_| format!("row {}: bad index {s:?}", row + 2))?;
            if !(idx.is_finite() && idx >= 1.0) {
                return Err(format!("row {}: bad index {s:?}", row + 2));
            }
            onsets[k].push((idx - 1.0) / rate);
        }
    }
    let anns: Vec<BreathAnnotation> = cols
        .iter()
        .zip(onsets)
        .map(|(&(_, who), onset_times_s)| BreathAnnotation {
            subject_id: id.to_string(),
            annotator_id: who,
            onset_times_s,
        })
        .collect();
    for a in &anns {
        a.validate(duration).map_err(|e| e.to_string())?;
    }
    Ok(anns)
}

/// Write a subject in the BIDMC CSV layout (`Signals` plus `Breaths`).
pub fn write_bidmc_subject(dir: &Path, bundle: &SubjectBundle) -> Result<Vec<PathBuf>> {
    let id = &bundle.subject_id;
    let fs = bundle.ppg.sampling_rate_hz;
    let sig_path = dir.join(format!("{id}{SIGNALS_SUFFIX}"));
    let mut w = csv::Writer::from_path(&sig_path)
        .map_err(|e| Error::io(&sig_path, std::io::Error::other(e)))?;
    let wrap = |p: &Path, e: csv::Error| Error::io(p, std::io::Error::other(e));
    w.write_record(["Time [s]", " RESP", " PLETH"])
        .map_err(|e| wrap(&sig_path, e))?;
    for (i, (r, p)) in bundle
        .resp
        .samples
        .iter()
        .zip(&bundle.ppg.samples)
        .enumerate()
    {
        w.write_record([
            format!("{:.3}", i as f64 / fs),
            format!("{r:.6}"),
            format!("{p:.6}"),
        ])
        .map_err(|e| wrap(&sig_path, e))?;
    }
    w.flush().map_err(|e| Error::io(&sig_path, e))?;
    let mut written = vec![sig_path];

    if !bundle.annotations.is_empty() {
        let br_path = dir.join(format!("{id}{BREATHS_SUFFIX}"));
        let mut w = csv::WriterBuilder::new()
            .flexible(true)
            .from_path(&br_path)
            .map_err(|e| wrap(&br_path, e))?;
        let header: Vec<String> = bundle
            .annotations
            .iter()
            .map(|a| match a.annotator_id {
                AnnotatorId::A1 => "breaths ann1".to_string(),
                AnnotatorId::A2 => " breaths ann2".to_string(),
            })
            .collect();
        w.write_record(&header).map_err(|e| wrap(&br_path, e))?;
        let rows = bundle
            .annotations
            .iter()
            .map(|a| a.onset_times_s.len())
            .max()
            .unwrap_or(0);
        for r in 0..rows {
            let rec: Vec<String> = bundle
                .annotations
                .iter()
                .map(|a| {
                    a.onset_times_s
                        .get(r)
                        .map(|t| format!("{}", (t * fs).round() as u64 + 1))
                        .unwrap_or_default()
                })
                .collect();
            w.write_record(&rec).map_err(|e| wrap(&br_path, e))?;
        }
        w.flush().map_err(|e| Error::io(&br_path, e))?;
        written.push(br_path);
    }
    Ok(written)
}
