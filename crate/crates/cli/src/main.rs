#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod manifest;
mod signal;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use prt_core::parallel::ExecMode;

use commands::{Ctx, EstimateArgs, Method, PlotArgs, SynthArgs, TrainArgs, TranslateArgs};
use config::{Preset, RunConfig};
use error::{CliError, EXIT_USAGE};

/// PPG-to-respiration translation: data preparation, training, rate
/// estimation and subject-wise cross-validation.
///
/// Exit codes: 0 success, 1 usage or config error, 2 data error, 3 training
/// divergence or partial cross-validation, 4 I/O error.
#[derive(Debug, Parser)]
#[command(name = "prt", version)]
struct Cli {
    /// TOML run configuration (see `prt init-config`).
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Override the master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the artifact root directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,

    /// Override the BIDMC dataset directory.
    #[arg(long, global = true, env = "PRT_DATASET_ROOT")]
    dataset_root: Option<PathBuf>,

    /// Run every data-parallel stage on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,

    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load the dataset, condition and window it, and write the archive and
    /// window manifest under <output_dir>/prepared.
    Prepare,

    /// Train the translator on prepared subjects; writes
    /// <output_dir>/train/{model.ckpt,train_log.csv}.
    Train {
        /// Prepared directory [default: <output_dir>/prepared].
        #[arg(long)]
        prepared: Option<PathBuf>,
        /// Override translator.epochs.
        #[arg(long)]
        epochs: Option<usize>,
        /// Cap the number of optimizer steps.
        #[arg(long)]
        max_iterations: Option<usize>,
        /// Override validation_subjects.
        #[arg(long)]
        validation_subjects: Option<usize>,
    },

    /// Translate a PPG signal file into a synthetic respiratory signal.
    Translate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Signal CSV (`value` or `time_s,value`).
        #[arg(long)]
        input: PathBuf,
        /// Sampling rate of the input, Hz; inferred from a time column if omitted.
        #[arg(long)]
        fs: Option<f64>,
        /// Output CSV [default: <output_dir>/translate/<input>_resp.csv].
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Estimate the respiratory rate of a signal file.
    Estimate {
        /// Signal CSV (`value` or `time_s,value`).
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        fs: Option<f64>,
        #[arg(long, value_enum, default_value_t = Method::Count)]
        method: Method,
        /// Softmax sharpness for the spectral method.
        #[arg(long, default_value_t = 20.0)]
        beta: f64,
    },

    /// Subject-wise k-fold cross-validation; writes report.json and
    /// summary.txt under <output_dir>/evaluate.
    Evaluate {
        #[arg(long)]
        prepared: Option<PathBuf>,
        /// Override k_folds.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        max_iterations: Option<usize>,
    },

    /// Plot reference, synthetic and processed synthetic respiration for a
    /// span of one subject's windows.
    Plot {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        subject: String,
        #[arg(long, default_value_t = 0)]
        start_window: usize,
        #[arg(long, default_value_t = 2)]
        windows: usize,
        #[arg(long)]
        prepared: Option<PathBuf>,
        /// Output PNG [default: <output_dir>/plot/<subject>_<start>-<end>.png].
        #[arg(long)]
        out: Option<PathBuf>,
    },

    /// Write a synthetic cohort in BIDMC layout [default: into dataset_root].
    Synth {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        #[arg(long, default_value_t = 480.0)]
        duration_s: f64,
    },

    /// Print a fully commented configuration file.
    InitConfig {
        #[arg(long, value_enum, default_value_t = Preset::Full)]
        preset: Preset,
        /// Write to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn build_ctx(cli: &Cli) -> Result<Ctx, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(d) = &cli.output_dir {
        cfg.output_dir = d.clone();
    }
    if let Some(d) = &cli.dataset_root {
        cfg.dataset_root = d.clone();
    }
    match &cli.command {
        Command::Train {
            epochs,
            max_iterations,
            validation_subjects,
            ..
        } => {
            cfg.translator.epochs = epochs.unwrap_or(cfg.translator.epochs);
            cfg.translator.max_iterations = max_iterations.or(cfg.translator.max_iterations);
            cfg.validation_subjects = validation_subjects.unwrap_or(cfg.validation_subjects);
        }
        Command::Evaluate {
            k,
            epochs,
            max_iterations,
            ..
        } => {
            cfg.k_folds = k.unwrap_or(cfg.k_folds);
            cfg.translator.epochs = epochs.unwrap_or(cfg.translator.epochs);
            cfg.translator.max_iterations = max_iterations.or(cfg.translator.max_iterations);
        }
        _ => {}
    }
    let exec = if cli.sequential {
        ExecMode::Sequential
    } else {
        ExecMode::Parallel
    };
    Ok(Ctx {
        cfg: cfg.resolve(exec)?,
        config_path: cli.config.clone(),
        exec,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Command::InitConfig { preset, out } = &cli.command {
        let text = RunConfig::preset(*preset).to_documented_toml();
        return match out {
            Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(p, e)),
            None => {
                print!("{text}");
                Ok(())
            }
        };
    }
    let ctx = build_ctx(&cli)?;
    match cli.command {
        Command::Prepare => commands::prepare(&ctx),
        Command::Train { prepared, .. } => commands::train(&ctx, &TrainArgs { prepared }),
        Command::Translate {
            checkpoint,
            input,
            fs,
            out,
        } => commands::translate(
            &ctx,
            &TranslateArgs {
                checkpoint,
                input,
                fs,
                out,
            },
        ),
        Command::Estimate {
            input,
            fs,
            method,
            beta,
        } => commands::estimate(
            &ctx,
            &EstimateArgs {
                input,
                fs,
                method,
                beta,
            },
        ),
        Command::Evaluate { prepared, .. } => commands::evaluate(&ctx, &prepared),
        Command::Plot {
            checkpoint,
            subject,
            start_window,
            windows,
            prepared,
            out,
        } => commands::plot(
            &ctx,
            &PlotArgs {
                checkpoint,
                subject,
                start_window,
                windows,
                prepared,
                out,
            },
        ),
        Command::Synth {
            out,
            subjects,
            duration_s,
        } => commands::synth(
            &ctx,
            &SynthArgs {
                out,
                subjects,
                duration_s,
            },
        ),
        Command::InitConfig { .. } => unreachable!(),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE as u8 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
