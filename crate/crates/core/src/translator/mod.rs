//! PPG-to-respiration translator: two generators, two patch discriminators,
//! the composite objective and the adversarial training loop.

pub mod checkpoint;
pub mod config;
pub mod loss;
pub mod networks;
pub mod nn;
pub mod optim;
pub mod replay;
pub mod train;

pub use config::{GanLossForm, GeneratorObjective, RrLossMode, TranslatorConfig};
pub use loss::LossBreakdown;
pub use networks::{Discriminator, Generator};
pub use train::{
    train, translate, EpochLog, StopReason, TrainLog, TrainOutcome, Trainer, TranslatorBundle,
};
