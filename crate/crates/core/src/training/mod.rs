//! Optimisation: loss, epoch loop, early stopping and checkpoints.

mod checkpoint;
mod config;
mod early_stop;
mod loss;
mod trainer;

pub use checkpoint::{Checkpoint, ModelState, CHECKPOINT_VERSION};
pub use config::{TrainConfig, DEFAULT_CLIP_NORM};
pub use early_stop::EarlyStopping;
pub use loss::{bce_loss, l2_penalty};
pub use trainer::{
    batch_loss, cardinalities, epoch_examples, loss_on_tape, train, train_step, train_with, EpochRecord, Resume,
    TrainOptions, TrainOutcome,
};
