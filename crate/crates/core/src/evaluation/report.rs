use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{CvConfig, Exclusion, FoldAssignment, SegmentRecord, SEGMENT_RULE};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum FoldStatus {
    Completed,
    Aborted { reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold_index: usize,
    pub test_subjects: Vec<String>,
    pub validation_subjects: Vec<String>,
    pub n_train_subjects: usize,
    pub n_segments: usize,
    pub mae: Option<f64>,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    #[serde(flatten)]
    pub status: FoldStatus,
}

/// Cross-validation result.
///
/// `per_fold_mae` holds the MAE of every completed fold in fold order;
/// `mean_mae` and `std_mae` (population standard deviation) are taken over
/// it. `partial` is set when any fold aborted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub k: usize,
    pub seed: u64,
    pub per_fold_mae: Vec<f64>,
    /// `None` when no fold completed.
    pub mean_mae: Option<f64>,
    pub std_mae: Option<f64>,
    pub partial: bool,
    pub segment_rule: String,
    pub folds: Vec<FoldSummary>,
    pub fold_assignment: FoldAssignment,
    pub per_segment: Vec<SegmentRecord>,
    pub excluded: Vec<Exclusion>,
    pub config: CvConfig,
}

impl EvaluationReport {
    pub(super) fn assemble(
        cfg: &CvConfig,
        assignment: FoldAssignment,
        folds: Vec<FoldSummary>,
        per_segment: Vec<SegmentRecord>,
        excluded: Vec<Exclusion>,
    ) -> Self {
        let per_fold_mae: Vec<f64> = folds
            .iter()
            .filter(|f| f.status == FoldStatus::Completed)
            .filter_map(|f| f.mae)
            .collect();
        let n = per_fold_mae.len() as f64;
        let (mean_mae, std_mae) = if per_fold_mae.is_empty() {
            (None, None)
        } else {
            let m = per_fold_mae.iter().sum::<f64>() / n;
            let v = per_fold_mae.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
            (Some(m), Some(v.sqrt()))
        };
        let partial = folds.iter().any(|f| f.status != FoldStatus::Completed);
        Self {
            k: cfg.k,
            seed: cfg.seed,
            per_fold_mae,
            mean_mae,
            std_mae,
            partial,
            segment_rule: SEGMENT_RULE.to_string(),
            folds,
            fold_assignment: assignment,
            per_segment,
            excluded,
            config: cfg.clone(),
        }
    }

    /// Mean over folds of the per-fold MAE recomputed from `per_segment`.
    pub fn mean_mae_from_segments(&self) -> f64 {
        let maes: Vec<f64> = self
            .folds
            .iter()
            .filter(|f| f.status == FoldStatus::Completed)
            .filter_map(|f| {
                let recs: Vec<SegmentRecord> = self
                    .per_segment
                    .iter()
                    .filter(|r| r.fold_index == f.fold_index)
                    .cloned()
                    .collect();
                super::mean_abs_error(&recs)
            })
            .collect();
        maes.iter().sum::<f64>() / maes.len() as f64
    }
}

pub fn summary_table(r: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "fold  test  segments  mae_brpm  status");
    for f in &r.folds {
        let status = match &f.status {
            FoldStatus::Completed => "completed".to_string(),
            FoldStatus::Aborted { reason } => format!("aborted ({reason})"),
        };
        let mae = f.mae.map_or("-".to_string(), |m| format!("{m:.3}"));
        let _ = writeln!(
            s,
            "{:>4}  {:>4}  {:>8}  {:>8}  {status}",
            f.fold_index,
            f.test_subjects.len(),
            f.n_segments,
            mae
        );
    }
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.2}"));
    let _ = writeln!(
        s,
        "MAE {} ± {} brpm over {} fold(s){}",
        fmt(r.mean_mae),
        fmt(r.std_mae),
        r.per_fold_mae.len(),
        if r.partial { " [partial]" } else { "" }
    );
    for e in &r.excluded {
        let _ = writeln!(s, "excluded {}: {}", e.subject_id, e.reason);
    }
    s
}

/// Write `report.json` and `summary.txt` into `dir`.
pub fn write_report(r: &EvaluationReport, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("report.json");
    let json = serde_json::to_string_pretty(r).map_err(|e| Error::Format {
        file: json_path.clone(),
        reason: e.to_string(),
    })?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let txt_path = dir.join("summary.txt");
    std::fs::write(&txt_path, summary_table(r)).map_err(|e| Error::io(&txt_path, e))?;
    Ok((json_path, txt_path))
}
