use std::path::{Path, PathBuf};

use prt_core::evaluation::CvConfig;
use prt_core::parallel::ExecMode;
use prt_core::preprocess::WindowConfig;
use prt_core::respmetrics::RespConfig;
use prt_core::translator::TranslatorConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Everything a run needs, loaded from one TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_root: PathBuf,
    pub output_dir: PathBuf,
    /// Master seed; copied into the translator and the fold splitter.
    pub seed: u64,
    pub k_folds: usize,
    /// Subjects held out for early stopping by `prt train`.
    pub validation_subjects: usize,
    pub window: WindowConfig,
    pub translator: TranslatorConfig,
    pub resp: RespConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dataset_root: PathBuf::from("data/bidmc"),
            output_dir: PathBuf::from("runs"),
            seed: 0,
            k_folds: 5,
            validation_subjects: 1,
            window: WindowConfig::default(),
            translator: TranslatorConfig::default(),
            resp: RespConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Preset {
    /// Full-size networks.
    Full,
    /// Small networks for desk-scale runs.
    Toy,
}

impl RunConfig {
    pub fn preset(p: Preset) -> Self {
        let translator = match p {
            Preset::Full => TranslatorConfig::default(),
            Preset::Toy => TranslatorConfig::toy(),
        };
        Self {
            translator,
            ..Self::default()
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }

    /// Propagate the shared fields into the embedded configs and validate.
    pub fn resolve(mut self, exec: ExecMode) -> Result<Self, CliError> {
        self.translator.seed = self.seed;
        self.translator.window_len = self.window.window_len();
        self.translator.sample_rate_hz = self.window.target_rate_hz;
        self.translator.exec = exec;
        self.translator.validate()?;
        if self.k_folds < 2 {
            return Err(CliError::Usage("k_folds must be >= 2".into()));
        }
        let w = &self.window;
        if !(w.target_rate_hz > 0.0
            && w.window_s > 0.0
            && w.stride_s > 0.0
            && w.train_stride_s > 0.0)
        {
            return Err(CliError::Usage(
                "window: rates, lengths and strides must be positive".into(),
            ));
        }
        Ok(self)
    }

    pub fn cv_config(&self, output_dir: Option<PathBuf>) -> CvConfig {
        CvConfig {
            k: self.k_folds,
            seed: self.seed,
            translator: self.translator.clone(),
            window: self.window,
            resp: self.resp,
            output_dir,
            exec: self.translator.exec,
        }
    }

    /// Commented TOML rendering of `self`.
    pub fn to_documented_toml(&self) -> String {
        let mut snapshot = self.clone();
        snapshot.translator.seed = snapshot.seed;
        let raw = toml::to_string_pretty(&snapshot).expect("config serializes");
        let mut out = String::from(HEADER);
        let mut section = String::new();
        for line in raw.lines() {
            let trimmed = line.trim();
            if trimmed.starts_with('[') {
                section = trimmed.trim_matches(|c| c == '[' || c == ']').to_string();
            } else if let Some((key, _)) = trimmed.split_once(" = ") {
                if let Some(doc) = doc_for(&section, key) {
                    for d in doc.lines() {
                        out.push_str("# ");
                        out.push_str(d);
                        out.push('\n');
                    }
                }
            }
            out.push_str(line);
            out.push('\n');
        }
        out
    }
}

const HEADER: &str = "\
# prt run configuration.
# Every key is optional; missing keys take the defaults shown here.
# Entries marked (design decision) are choices made by this implementation
# where the method leaves the value open.
";

fn doc_for(section: &str, key: &str) -> Option<&'static str> {
    Some(match (section, key) {
        ("", "dataset_root") => "Directory holding bidmc_XX_Signals.csv / bidmc_XX_Breaths.csv.\nOverridden by --dataset-root or PRT_DATASET_ROOT.",
        ("", "output_dir") => "Root for all artifacts; overridden by --output-dir.",
        ("", "seed") => "Master seed for weight init, shuffling, replay buffers and fold assignment.\nOverrides translator.seed; overridden by --seed.",
        ("", "k_folds") => "Subject-wise cross-validation folds.",
        ("", "validation_subjects") => "Subjects held out for early stopping in `prt train` (design decision).",
        ("window", "target_rate_hz") => "Rate both channels are resampled to.",
        ("window", "window_s") => "Window length in seconds.",
        ("window", "stride_s") => "Stride of evaluation windows (non-overlapping).",
        ("window", "train_stride_s") => "Stride of training windows; shorter values overlap for augmentation (design decision).",
        ("translator", "lambda_cyc") => "Cycle-consistency weight.",
        ("translator", "lambda_rr") => "Respiratory-rate loss weight. The soft rate loss is in breaths/min and\nits gradient does not vanish near zero error; small networks train\nbetter around 0.1 (design decision).",
        ("translator", "epochs") => "Maximum training epochs.",
        ("translator", "max_iterations") => "Optional hard cap on optimizer steps.",
        ("translator", "batch_size") => "Windows per optimizer step.",
        ("translator", "learning_rate") => "Adam step size (design decision).",
        ("translator", "adam_beta1") => "Adam first-moment decay (design decision).",
        ("translator", "adam_beta2") => "Adam second-moment decay (design decision).",
        ("translator", "decay_start_frac") => "Fraction of epochs after which the learning rate decays linearly to 0 (design decision).",
        ("translator", "residual_blocks") => "Residual blocks in each generator (design decision).",
        ("translator", "gen_base_channels") => "Generator base channel count (design decision).",
        ("translator", "disc_base_channels") => "Discriminator base channel count (design decision).",
        ("translator", "discriminator_receptive_field") => "Receptive field of each discriminator score, in samples (design decision).",
        ("translator", "init_std") => "Std of the normal weight initialization (design decision).",
        ("translator", "early_stop_patience") => "Epochs without validation improvement before stopping (design decision).",
        ("translator", "replay_buffer_size") => "Capacity of the generated-sample replay buffer (design decision).",
        ("translator", "seed") => "Ignored: the top-level seed is used.",
        ("translator", "gan_loss_form") => "CROSS_ENTROPY or LEAST_SQUARES (design decision).",
        ("translator", "generator_objective") => "SATURATING or NON_SATURATING; used with CROSS_ENTROPY (design decision).",
        ("translator", "rr_loss_mode") => "SOFT_SPECTRAL (differentiable) or HARD_NO_GRADIENT (design decision).",
        ("translator", "rr_beta") => "Softmax sharpness of the soft spectral rate (design decision).",
        ("translator", "window_len") => "Derived from [window]; ignored.",
        ("translator", "sample_rate_hz") => "Derived from [window]; ignored.",
        ("resp", "band_hz") => "Respiratory pass band, Hz.",
        ("resp", "filter_order") => "Butterworth order of each band edge (design decision).",
        ("resp", "smoothing_s") => "Moving-average smoothing width, seconds (design decision).",
        ("resp", "prominence_frac") => "Minimum breath peak prominence as a fraction of the signal std (design decision).",
        ("resp", "min_spacing_s") => "Minimum spacing between breaths, seconds (design decision).",
        ("resp", "min_denoise_s") => "Shortest input the denoiser accepts, seconds.",
        ("resp", "min_estimate_s") => "Shortest input the rate estimators accept, seconds.",
        _ => return None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_template_parses_back() {
        for p in [Preset::Full, Preset::Toy] {
            let cfg = RunConfig::preset(p);
            let text = cfg.to_documented_toml();
            let back: RunConfig = toml::from_str(&text).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn every_key_is_documented() {
        let text = RunConfig::default().to_documented_toml();
        let lines: Vec<&str> = text.lines().collect();
        for (i, l) in lines.iter().enumerate() {
            if l.contains(" = ") && !l.starts_with('#') {
                assert!(lines[i - 1].starts_with('#'), "undocumented: {l}");
            }
        }
    }

    #[test]
    fn empty_file_gives_defaults_and_unknown_keys_fail() {
        assert_eq!(
            toml::from_str::<RunConfig>("").unwrap(),
            RunConfig::default()
        );
        assert!(toml::from_str::<RunConfig>("sed = 3").is_err());
    }
}
