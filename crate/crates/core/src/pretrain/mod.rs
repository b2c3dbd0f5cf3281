//! Masked-language-model pretraining: corruption, loss, Adam and the
//! training loop.

mod adam;
mod config;
mod corrupt;
pub mod grammar;
mod loss;
mod train;

pub use adam::{adam_step, adam_update, AdamConfig, AdamState};
pub use config::TrainingConfig;
pub use corrupt::{mlm_corrupt, MaskedBatch};
pub use loss::mlm_loss;
pub use train::{batch_loss, train, train_from, write_loss_curve, LossPoint, TrainOutcome};
