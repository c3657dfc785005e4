//! Subject-disjoint cross-validation, per-minute RR error records, reports
//! and comparison plots.

mod folds;
pub mod plot;
pub mod report;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::dataset::{reference_rr, ReferenceSource};
use crate::error::{Error, Result};
use crate::parallel::{self, ExecMode};
use crate::preprocess::{PreparedSubject, WindowConfig, WindowPair};
use crate::respmetrics::{estimate_rr_count, RespConfig};
use crate::translator::{self, checkpoint, StopReason, TranslatorBundle, TranslatorConfig};

pub use folds::{split_subject_folds, FoldAssignment};
pub use plot::render_comparison_plot;
pub use report::{summary_table, write_report, EvaluationReport, FoldStatus, FoldSummary};

/// How 30 s windows become the 60 s evaluation segments; recorded in reports.
pub const SEGMENT_RULE: &str =
    "60 s segments = two adjacent non-overlapping 30 s windows concatenated; trailing partial minutes dropped";

/// Produces a synthetic respiration window for a window pair.
pub trait Synthesizer: Sync {
    fn synthesize(&self, pair: &WindowPair) -> Result<Vec<f64>>;
}

impl Synthesizer for TranslatorBundle {
    fn synthesize(&self, pair: &WindowPair) -> Result<Vec<f64>> {
        self.translate_samples(&pair.ppg.samples)
    }
}

/// Oracle that returns the reference respiration window unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferencePassthrough;

impl Synthesizer for ReferencePassthrough {
    fn synthesize(&self, pair: &WindowPair) -> Result<Vec<f64>> {
        Ok(pair.resp.samples.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentRecord {
    pub fold_index: usize,
    pub subject_id: String,
    pub minute_index: usize,
    pub start_time_s: f64,
    pub rr_estimated: f64,
    pub rr_reference: f64,
    pub abs_error: f64,
    pub reference_source: ReferenceSource,
    pub low_confidence: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub subject_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FoldEvaluation {
    pub records: Vec<SegmentRecord>,
    pub excluded: Vec<Exclusion>,
}

impl FoldEvaluation {
    pub fn mae(&self) -> Option<f64> {
        mean_abs_error(&self.records)
    }
}

pub fn mean_abs_error(records: &[SegmentRecord]) -> Option<f64> {
    if records.is_empty() {
        None
    } else {
        Some(records.iter().map(|r| r.abs_error).sum::<f64>() / records.len() as f64)
    }
}

fn evaluate_subject<S: Synthesizer + ?Sized>(
    synth: &S,
    subject: &PreparedSubject,
    fold_index: usize,
    resp: &RespConfig,
) -> std::result::Result<Vec<SegmentRecord>, String> {
    if let Some(issue) = &subject.bundle.annotation_issue {
        return Err(format!("annotation file unusable: {issue}"));
    }
    let mut pairs: Vec<&WindowPair> = subject.eval_pairs.iter().collect();
    pairs.sort_by_key(|p| p.ppg.window_index);
    let mut out = Vec::new();
    let mut i = 0;
    while i + 1 < pairs.len() {
        let (a, b) = (pairs[i], pairs[i + 1]);
        let contiguous = b.ppg.window_index == a.ppg.window_index + 1
            && (b.ppg.start_time_s - a.ppg.start_time_s - a.ppg.duration_s()).abs() < 1e-6;
        if !contiguous {
            i += 1;
            continue;
        }
        let fs = a.ppg.sampling_rate_hz;
        let start = a.ppg.start_time_s;
        let span = a.ppg.duration_s() + b.ppg.duration_s();
        let record = (|| -> Result<SegmentRecord> {
            let mut seg = synth.synthesize(a)?;
            seg.extend(synth.synthesize(b)?);
            let est = estimate_rr_count(&seg, fs, resp)?;
            let r = reference_rr(&subject.bundle, start, span, resp)?;
            Ok(SegmentRecord {
                fold_index,
                subject_id: subject.bundle.subject_id.clone(),
                minute_index: (start / 60.0).round() as usize,
                start_time_s: start,
                rr_estimated: est.rate_brpm,
                rr_reference: r.brpm,
                abs_error: (est.rate_brpm - r.brpm).abs(),
                reference_source: r.source,
                low_confidence: r.low_confidence,
            })
        })();
        match record {
            Ok(r) => out.push(r),
            Err(e) => log::warn!(
                "{} minute at {start} s skipped: {e}",
                subject.bundle.subject_id
            ),
        }
        i += 2;
    }
    if out.is_empty() {
        return Err("no valid 60 s segment".to_string());
    }
    Ok(out)
}

/// Per-minute records for `test_subjects`; subjects without a usable minute
/// (or with unusable annotations) are listed as excluded instead.
pub fn evaluate_fold<S: Synthesizer + ?Sized>(
    synth: &S,
    test_subjects: &[&PreparedSubject],
    fold_index: usize,
    resp: &RespConfig,
    exec: ExecMode,
) -> FoldEvaluation {
    let results = parallel::map(exec, test_subjects, |s| {
        evaluate_subject(synth, s, fold_index, resp)
    });
    let mut eval = FoldEvaluation::default();
    for (s, r) in test_subjects.iter().zip(results) {
        match r {
            Ok(recs) => eval.records.extend(recs),
            Err(reason) => eval.excluded.push(Exclusion {
                subject_id: s.bundle.subject_id.clone(),
                reason,
            }),
        }
    }
    eval
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CvConfig {
    pub k: usize,
    pub seed: u64,
    pub translator: TranslatorConfig,
    pub window: WindowConfig,
    pub resp: RespConfig,
    /// Where checkpoints and training logs are persisted, if anywhere.
    pub output_dir: Option<PathBuf>,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl Default for CvConfig {
    fn default() -> Self {
        Self {
            k: 5,
            seed: 0,
            translator: TranslatorConfig::default(),
            window: WindowConfig::default(),
            resp: RespConfig::default(),
            output_dir: None,
            exec: ExecMode::Parallel,
        }
    }
}

/// Subjects given to one fold's trainer. The validation fold rotates:
/// fold `i` is tested, fold `i + 1 (mod k)` validates, the rest train.
pub struct FoldPlan<'a> {
    pub fold_index: usize,
    pub train: Vec<&'a PreparedSubject>,
    pub validation: Vec<&'a PreparedSubject>,
    pub test: Vec<&'a PreparedSubject>,
}

impl FoldPlan<'_> {
    pub fn train_pairs(&self) -> Vec<WindowPair> {
        self.train
            .iter()
            .flat_map(|s| s.train_pairs.iter().cloned())
            .collect()
    }

    pub fn validation_pairs(&self) -> Vec<WindowPair> {
        self.validation
            .iter()
            .flat_map(|s| s.eval_pairs.iter().cloned())
            .collect()
    }
}

/// Outcome of a fold trainer.
pub struct TrainedFold<S> {
    pub model: S,
    pub stop: Option<StopReason>,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
}

fn plans<'a>(subjects: &'a [PreparedSubject], assign: &FoldAssignment) -> Vec<FoldPlan<'a>> {
    let k = assign.k;
    (0..k)
        .map(|i| {
            let val_fold = if k >= 3 { Some((i + 1) % k) } else { None };
            let mut plan = FoldPlan {
                fold_index: i,
                train: Vec::new(),
                validation: Vec::new(),
                test: Vec::new(),
            };
            for s in subjects {
                let f = assign.fold_of[&s.bundle.subject_id];
                if f == i {
                    plan.test.push(s);
                } else if Some(f) == val_fold {
                    plan.validation.push(s);
                } else {
                    plan.train.push(s);
                }
            }
            plan
        })
        .collect()
}

/// Cross-validation with a caller-supplied trainer. A fold whose trainer
/// fails is recorded as aborted and the report is marked partial.
pub fn run_cross_validation_with<S, F>(
    subjects: &[PreparedSubject],
    cfg: &CvConfig,
    trainer: F,
) -> Result<EvaluationReport>
where
    S: Synthesizer + Send,
    F: Fn(&FoldPlan) -> Result<TrainedFold<S>> + Sync + Send,
{
    let ids: Vec<String> = subjects
        .iter()
        .map(|s| s.bundle.subject_id.clone())
        .collect();
    let assign = split_subject_folds(&ids, cfg.k, cfg.seed)?;
    let plans = plans(subjects, &assign);
    for p in &plans {
        let test: std::collections::BTreeSet<&str> = p
            .test
            .iter()
            .map(|s| s.bundle.subject_id.as_str())
            .collect();
        assert!(
            p.train
                .iter()
                .chain(&p.validation)
                .all(|s| !test.contains(s.bundle.subject_id.as_str())),
            "fold {} leaks test subjects into training",
            p.fold_index
        );
    }

    let outcomes = parallel::map(cfg.exec, &plans, |plan| {
        let summary = |status, eval: &FoldEvaluation, t: Option<&TrainedFold<S>>| FoldSummary {
            fold_index: plan.fold_index,
            test_subjects: plan
                .test
                .iter()
                .map(|s| s.bundle.subject_id.clone())
                .collect(),
            validation_subjects: plan
                .validation
                .iter()
                .map(|s| s.bundle.subject_id.clone())
                .collect(),
            n_train_subjects: plan.train.len(),
            n_segments: eval.records.len(),
            mae: eval.mae(),
            epochs_run: t.map_or(0, |t| t.epochs_run),
            best_epoch: t.and_then(|t| t.best_epoch),
            status,
        };
        match trainer(plan) {
            Ok(t) => {
                if let Some(StopReason::Diverged { epoch, .. }) = &t.stop {
                    let status = FoldStatus::Aborted {
                        reason: format!("training diverged at epoch {epoch}"),
                    };
                    return (
                        summary(status, &FoldEvaluation::default(), Some(&t)),
                        FoldEvaluation::default(),
                    );
                }
                let eval =
                    evaluate_fold(&t.model, &plan.test, plan.fold_index, &cfg.resp, cfg.exec);
                let status = if eval.records.is_empty() {
                    FoldStatus::Aborted {
                        reason: "no evaluable test segment".into(),
                    }
                } else {
                    FoldStatus::Completed
                };
                (summary(status, &eval, Some(&t)), eval)
            }
            Err(e) => {
                log::error!("fold {} aborted: {e}", plan.fold_index);
                let status = FoldStatus::Aborted {
                    reason: e.to_string(),
                };
                (
                    summary(status, &FoldEvaluation::default(), None),
                    FoldEvaluation::default(),
                )
            }
        }
    });

    let mut folds = Vec::new();
    let mut per_segment = Vec::new();
    let mut excluded = Vec::new();
    for (summary, eval) in outcomes {
        folds.push(summary);
        per_segment.extend(eval.records);
        excluded.extend(eval.excluded);
    }
    Ok(EvaluationReport::assemble(
        cfg,
        assign,
        folds,
        per_segment,
        excluded,
    ))
}

/// Full cross-validation: trains a translator per fold (checkpoints and
/// logs are written under `cfg.output_dir` when set) and evaluates it.
pub fn run_cross_validation(
    subjects: &[PreparedSubject],
    cfg: &CvConfig,
) -> Result<EvaluationReport> {
    if let Some(dir) = &cfg.output_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tcfg = cfg.translator.clone();
    tcfg.window_len = cfg.window.window_len();
    tcfg.sample_rate_hz = cfg.window.target_rate_hz;
    run_cross_validation_with(subjects, cfg, |plan| {
        let log_path = cfg
            .output_dir
            .as_ref()
            .map(|d| d.join(format!("fold_{}_train_log.csv", plan.fold_index)));
        if let Some(p) = &log_path {
            if p.exists() {
                std::fs::remove_file(p).map_err(|e| Error::io(p, e))?;
            }
        }
        let mut log_err = None;
        let outcome = translator::train::train_observed(
            &plan.train_pairs(),
            &plan.validation_pairs(),
            &tcfg,
            |entry| {
                if let Some(p) = &log_path {
                    if let Err(e) = translator::train::append_log_csv(p, entry) {
                        log_err.get_or_insert(e);
                    }
                }
            },
        )?;
        if let Some(e) = log_err {
            return Err(e);
        }
        if let Some(dir) = &cfg.output_dir {
            checkpoint::save(
                &dir.join(format!("fold_{}.ckpt", plan.fold_index)),
                &outcome.bundle,
            )?;
        }
        let best_epoch = match &outcome.stop {
            StopReason::Diverged { .. } => None,
            _ => Some(outcome.bundle.epoch),
        };
        Ok(TrainedFold {
            epochs_run: outcome.log.epochs.len(),
            best_epoch,
            stop: Some(outcome.stop),
            model: outcome.bundle,
        })
    })
}
