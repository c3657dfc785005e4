use serde::{Deserialize, Serialize};

use crate::dsp::spectrum::SpectralConfig;
use crate::error::{Error, Result};
use crate::parallel::ExecMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GanLossForm {
    CrossEntropy,
    LeastSquares,
}

/// Generator side of the cross-entropy adversarial loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GeneratorObjective {
    /// Minimize `E[log(1 - D(fake))]`.
    Saturating,
    /// Minimize `-E[log D(fake)]`.
    NonSaturating,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RrLossMode {
    /// Differentiable spectral-centroid rate.
    SoftSpectral,
    /// Breath-count rate; reported but contributes no gradient.
    HardNoGradient,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TranslatorConfig {
    /// Weight of the cycle-consistency loss.
    pub lambda_cyc: f64,
    /// Weight of the respiratory-rate loss.
    pub lambda_rr: f64,
    pub epochs: usize,
    /// Optional hard cap on optimizer steps (smoke runs).
    pub max_iterations: Option<usize>,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Fraction of epochs after which the learning rate decays linearly to 0.
    pub decay_start_frac: f64,
    pub residual_blocks: usize,
    pub gen_base_channels: usize,
    pub disc_base_channels: usize,
    /// Target receptive field of each discriminator score, in samples.
    pub discriminator_receptive_field: usize,
    pub init_std: f64,
    pub early_stop_patience: usize,
    pub replay_buffer_size: usize,
    pub seed: u64,
    pub gan_loss_form: GanLossForm,
    pub generator_objective: GeneratorObjective,
    pub rr_loss_mode: RrLossMode,
    /// Softmax sharpness of the soft spectral RR.
    pub rr_beta: f64,
    pub window_len: usize,
    pub sample_rate_hz: f64,
    #[serde(skip)]
    pub exec: ExecMode,
}

impl Default for TranslatorConfig {
    fn default() -> Self {
        Self {
            lambda_cyc: 10.0,
            lambda_rr: 10.0,
            epochs: 100,
            max_iterations: None,
            batch_size: 1,
            learning_rate: 2e-4,
            adam_beta1: 0.5,
            adam_beta2: 0.999,
            decay_start_frac: 0.5,
            residual_blocks: 6,
            gen_base_channels: 64,
            disc_base_channels: 64,
            discriminator_receptive_field: 70,
            init_std: 0.02,
            early_stop_patience: 10,
            replay_buffer_size: 50,
            seed: 0,
            gan_loss_form: GanLossForm::LeastSquares,
            generator_objective: GeneratorObjective::NonSaturating,
            rr_loss_mode: RrLossMode::SoftSpectral,
            rr_beta: 2.0,
            window_len: 900,
            sample_rate_hz: 30.0,
            exec: ExecMode::Parallel,
        }
    }
}

impl TranslatorConfig {
    /// Small network for desk-scale smoke runs and tests.
    ///
    /// The soft RR term is measured in breaths/min and its gradient does not
    /// vanish near zero error, so at full weight it drowns the cycle term in
    /// short runs; the toy setting weights it down.
    pub fn toy() -> Self {
        Self {
            lambda_rr: 0.1,
            residual_blocks: 2,
            gen_base_channels: 8,
            disc_base_channels: 8,
            batch_size: 4,
            learning_rate: 2e-3,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::arg(format!("translator config: {m}")));
        if !(self.lambda_cyc > 0.0) {
            return bad("lambda_cyc must be > 0");
        }
        if !(self.lambda_rr >= 0.0) {
            return bad("lambda_rr must be >= 0");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.batch_size < 1 {
            return bad("batch_size must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..=1.0).contains(&self.decay_start_frac) {
            return bad("decay_start_frac must be in [0, 1]");
        }
        if self.gen_base_channels < 1 || self.disc_base_channels < 1 {
            return bad("channel counts must be >= 1");
        }
        if self.discriminator_receptive_field < 4 {
            return bad("discriminator_receptive_field must be >= 4");
        }
        if self.window_len < 16 {
            return bad("window_len must be >= 16");
        }
        if !(self.rr_beta > 0.0) {
            return bad("rr_beta must be > 0");
        }
        Ok(())
    }

    pub fn spectral(&self) -> SpectralConfig {
        SpectralConfig {
            beta: self.rr_beta,
            segment_s: self.window_len as f64 / self.sample_rate_hz,
            ..SpectralConfig::default()
        }
    }
}
