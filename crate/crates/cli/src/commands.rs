use std::path::{Path, PathBuf};

use log::{info, warn};
use prt_core::dataset::synth::{cohort, SynthConfig};
use prt_core::dataset::{
    archive, load_bidmc, write_bidmc_subject, Channel, LoadOptions, SignalRecord,
};
use prt_core::evaluation::{
    render_comparison_plot, run_cross_validation, summary_table, write_report,
};
use prt_core::parallel::ExecMode;
use prt_core::preprocess::{
    condition_record, make_windows, manifest, prepare_all, PreparedSubject, WindowPair,
};
use prt_core::respmetrics::{denoise, estimate_rr_count, estimate_rr_spectral, RrMethod};
use prt_core::translator::train::{append_log_csv, train_observed};
use prt_core::translator::{checkpoint, StopReason};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::manifest::RunManifest;
use crate::signal;

pub const SUBJECTS_DIR: &str = "subjects";
pub const WINDOWS_DIR: &str = "windows";

pub struct Ctx {
    pub cfg: RunConfig,
    /// The `--config` file, hashed as an input of every run.
    pub config_path: Option<PathBuf>,
    pub exec: ExecMode,
}

impl Ctx {
    fn out(&self, sub: &str) -> PathBuf {
        self.cfg.output_dir.join(sub)
    }

    fn prepared_dir(&self, arg: &Option<PathBuf>) -> PathBuf {
        arg.clone().unwrap_or_else(|| self.out("prepared"))
    }

    fn manifest(&self, command: &str, inputs: &[&Path], dir: &Path) -> Result<(), CliError> {
        let mut all: Vec<&Path> = self.config_path.iter().map(PathBuf::as_path).collect();
        all.extend_from_slice(inputs);
        let path = RunManifest::new(command, &self.cfg, &all)?.write(dir)?;
        info!("wrote {}", path.display());
        Ok(())
    }

    fn load_prepared(&self, dir: &Path) -> Result<Vec<PreparedSubject>, CliError> {
        let bundles = archive::read_all(&dir.join(SUBJECTS_DIR))?;
        if bundles.is_empty() {
            return Err(CliError::Usage(format!(
                "{}: no prepared subjects, run `prt prepare` first",
                dir.display()
            )));
        }
        Ok(prepare_all(&bundles, &self.cfg.window, self.exec)?)
    }
}

fn reset_dir(dir: &Path) -> Result<(), CliError> {
    if dir.exists() {
        std::fs::remove_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))
}

pub fn prepare(ctx: &Ctx) -> Result<(), CliError> {
    let root = &ctx.cfg.dataset_root;
    let opts = LoadOptions {
        exec: ctx.exec,
        ..LoadOptions::default()
    };
    let bundles = load_bidmc(root, &opts)?;
    for b in bundles
        .iter()
        .filter_map(|b| b.annotation_issue.as_ref().map(|i| (&b.subject_id, i)))
    {
        warn!(
            "{}: annotations unusable ({}), excluded from evaluation",
            b.0, b.1
        );
    }
    let prepared = prepare_all(&bundles, &ctx.cfg.window, ctx.exec)?;
    let dir = ctx.out("prepared");
    let subjects_dir = dir.join(SUBJECTS_DIR);
    let windows_dir = dir.join(WINDOWS_DIR);
    reset_dir(&subjects_dir)?;
    reset_dir(&windows_dir)?;
    archive::write_all(&subjects_dir, &bundles)?;
    let pairs: Vec<WindowPair> = prepared
        .iter()
        .flat_map(|p| p.eval_pairs.iter().cloned())
        .collect();
    manifest::write(&windows_dir, &pairs)?;
    let n_train: usize = prepared.iter().map(|p| p.train_pairs.len()).sum();
    println!(
        "{} subjects, {} window pairs ({n_train} training windows)",
        prepared.len(),
        pairs.len()
    );
    ctx.manifest("prepare", &[root], &dir)
}

pub struct TrainArgs {
    pub prepared: Option<PathBuf>,
}

pub fn train(ctx: &Ctx, args: &TrainArgs) -> Result<(), CliError> {
    let prepared_dir = ctx.prepared_dir(&args.prepared);
    let subjects = ctx.load_prepared(&prepared_dir)?;
    let n_val = ctx.cfg.validation_subjects;
    let n_val = if n_val >= subjects.len() {
        warn!(
            "only {} subject(s): training on all of them without validation",
            subjects.len()
        );
        0
    } else {
        n_val
    };
    let (tr, val) = subjects.split_at(subjects.len() - n_val);
    let pairs: Vec<WindowPair> = tr
        .iter()
        .flat_map(|s| s.train_pairs.iter().cloned())
        .collect();
    let val_pairs: Vec<WindowPair> = val
        .iter()
        .flat_map(|s| s.eval_pairs.iter().cloned())
        .collect();
    info!(
        "training on {} subjects ({} windows), validating on {:?}",
        tr.len(),
        pairs.len(),
        val.iter()
            .map(|s| s.bundle.subject_id.as_str())
            .collect::<Vec<_>>()
    );

    let dir = ctx.out("train");
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let log_path = dir.join("train_log.csv");
    if log_path.exists() {
        std::fs::remove_file(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    }
    let mut log_err = None;
    let outcome = train_observed(&pairs, &val_pairs, &ctx.cfg.translator, |e| {
        let val = e.val_mae.map_or("-".to_string(), |v| format!("{v:.3}"));
        println!(
            "epoch {}: adv_G={:.6} adv_F={:.6} cyc={:.6} rr={:.6} total={:.6} val_mae={val}",
            e.epoch, e.loss.adv_g, e.loss.adv_f, e.loss.cyc, e.loss.rr, e.loss.total
        );
        if let Err(err) = append_log_csv(&log_path, e) {
            log_err.get_or_insert(err);
        }
    })?;
    if let Some(e) = log_err {
        return Err(e.into());
    }
    let ckpt = dir.join("model.ckpt");
    checkpoint::save(&ckpt, &outcome.bundle)?;
    ctx.manifest("train", &[&prepared_dir], &dir)?;
    println!(
        "checkpoint {} (epoch {})",
        ckpt.display(),
        outcome.bundle.epoch
    );
    match outcome.stop {
        StopReason::Diverged { epoch, breakdown } => Err(CliError::Incomplete(format!(
            "training diverged at epoch {epoch} ({breakdown:?}); saved last good state"
        ))),
        StopReason::EarlyStopped { best_epoch } => {
            println!("early stopped, best epoch {best_epoch}");
            Ok(())
        }
        StopReason::MaxIterations => {
            println!("stopped at the iteration cap");
            Ok(())
        }
        StopReason::Completed => Ok(()),
    }
}

pub struct TranslateArgs {
    pub checkpoint: PathBuf,
    pub input: PathBuf,
    pub fs: Option<f64>,
    pub out: Option<PathBuf>,
}

pub fn translate(ctx: &Ctx, args: &TranslateArgs) -> Result<(), CliError> {
    let bundle = checkpoint::load(&args.checkpoint)?;
    let sig = signal::read(&args.input, args.fs)?;
    let record = SignalRecord::new("input", Channel::Ppg, sig.fs, sig.samples)?;
    let w = &ctx.cfg.window;
    if bundle.config.window_len != w.window_len() {
        return Err(CliError::Usage(format!(
            "checkpoint expects {}-sample windows, config gives {}",
            bundle.config.window_len,
            w.window_len()
        )));
    }
    let conditioned = condition_record(&record, w)?;
    let windows = make_windows(&conditioned, w.window_s, w.window_s)?;
    let covered = windows.len() as f64 * w.window_s;
    if covered + 1e-9 < conditioned.duration_s() {
        warn!(
            "dropping the trailing {:.1} s that do not fill a window",
            conditioned.duration_s() - covered
        );
    }
    let mut out = Vec::with_capacity(windows.len() * w.window_len());
    for win in &windows {
        out.extend(bundle.translate(win)?.samples);
    }
    let dir = ctx.out("translate");
    let out_path = args.out.clone().unwrap_or_else(|| {
        let stem = args
            .input
            .file_stem()
            .map_or("signal".into(), |s| s.to_string_lossy().into_owned());
        dir.join(format!("{stem}_resp.csv"))
    });
    signal::write(&out_path, w.target_rate_hz, &out)?;
    ctx.manifest("translate", &[&args.checkpoint, &args.input], &dir)?;
    println!(
        "{} windows -> {} ({} samples at {} Hz)",
        windows.len(),
        out_path.display(),
        out.len(),
        w.target_rate_hz
    );
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Count,
    Spectral,
}

pub struct EstimateArgs {
    pub input: PathBuf,
    pub fs: Option<f64>,
    pub method: Method,
    pub beta: f64,
}

pub fn estimate(ctx: &Ctx, args: &EstimateArgs) -> Result<(), CliError> {
    let sig = signal::read(&args.input, args.fs)?;
    let est = match args.method {
        Method::Count => estimate_rr_count(&sig.samples, sig.fs, &ctx.cfg.resp)?,
        Method::Spectral => estimate_rr_spectral(&sig.samples, sig.fs, args.beta, &ctx.cfg.resp)?,
    };
    let method = match est.method {
        RrMethod::PeakCount => "breath count",
        RrMethod::Spectral => "spectral",
    };
    println!(
        "{:.1} brpm ({method}, {} breaths over {:.1} s, confidence {:.2})",
        est.rate_brpm, est.breath_count, est.duration_s, est.confidence
    );
    ctx.manifest("estimate", &[&args.input], &ctx.out("estimate"))
}

pub fn evaluate(ctx: &Ctx, prepared: &Option<PathBuf>) -> Result<(), CliError> {
    let prepared_dir = ctx.prepared_dir(prepared);
    let subjects = ctx.load_prepared(&prepared_dir)?;
    let dir = ctx.out("evaluate");
    let report = run_cross_validation(&subjects, &ctx.cfg.cv_config(Some(dir.clone())))?;
    let (json, _) = write_report(&report, &dir)?;
    ctx.manifest("evaluate", &[&prepared_dir], &dir)?;
    print!("{}", summary_table(&report));
    println!("report {}", json.display());
    if report.partial {
        return Err(CliError::Incomplete(
            "cross-validation is partial: some folds aborted".into(),
        ));
    }
    Ok(())
}

pub struct PlotArgs {
    pub checkpoint: PathBuf,
    pub subject: String,
    pub start_window: usize,
    pub windows: usize,
    pub prepared: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn plot(ctx: &Ctx, args: &PlotArgs) -> Result<(), CliError> {
    let prepared_dir = ctx.prepared_dir(&args.prepared);
    let bundle = checkpoint::load(&args.checkpoint)?;
    let subjects = ctx.load_prepared(&prepared_dir)?;
    let subject = subjects
        .iter()
        .find(|s| s.bundle.subject_id == args.subject)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "subject {} not in {}",
                args.subject,
                prepared_dir.display()
            ))
        })?;
    let end = args.start_window + args.windows;
    if args.windows == 0 || end > subject.eval_pairs.len() {
        return Err(CliError::Usage(format!(
            "{} has {} windows, asked for {}..{end}",
            args.subject,
            subject.eval_pairs.len(),
            args.start_window
        )));
    }
    let span = &subject.eval_pairs[args.start_window..end];
    let reference: Vec<_> = span.iter().map(|p| p.resp.clone()).collect();
    let synthetic = span
        .iter()
        .map(|p| bundle.translate(&p.ppg))
        .collect::<prt_core::Result<Vec<_>>>()?;
    let joined: Vec<f64> = synthetic
        .iter()
        .flat_map(|w| w.samples.iter().copied())
        .collect();
    let processed = denoise(&joined, ctx.cfg.window.target_rate_hz, &ctx.cfg.resp)?;
    let dir = ctx.out("plot");
    let out = args.out.clone().unwrap_or_else(|| {
        dir.join(format!(
            "{}_{}-{}.png",
            args.subject, args.start_window, end
        ))
    });
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    render_comparison_plot(&reference, &synthetic, &processed, &out)?;
    ctx.manifest("plot", &[&args.checkpoint, &prepared_dir], &dir)?;
    println!("plot {}", out.display());
    Ok(())
}

pub struct SynthArgs {
    pub out: Option<PathBuf>,
    pub subjects: usize,
    pub duration_s: f64,
}

pub fn synth(ctx: &Ctx, args: &SynthArgs) -> Result<(), CliError> {
    if args.subjects == 0 || !(args.duration_s >= 60.0) {
        return Err(CliError::Usage(
            "synth needs >= 1 subject and >= 60 s".into(),
        ));
    }
    let dir = args
        .out
        .clone()
        .unwrap_or_else(|| ctx.cfg.dataset_root.clone());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let bundles = cohort(&SynthConfig {
        subjects: args.subjects,
        duration_s: args.duration_s,
        seed: ctx.cfg.seed,
        ..SynthConfig::default()
    });
    for b in &bundles {
        write_bidmc_subject(&dir, b)?;
    }
    ctx.manifest("synth", &[], &dir)?;
    println!("{} synthetic subjects in {}", bundles.len(), dir.display());
    Ok(())
}
