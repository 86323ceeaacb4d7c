//! Proximal group-lasso steps, Adam, and the minibatch trainer.

mod adam;
mod prox;
mod train;

pub use adam::{adam_step, AdamState};
pub use prox::{prox_columns, prox_group, prox_group_in_place};
pub use train::{
    train, train_from, zero_columns, EpochRecord, ProxConfig, StepOutcome, TrainOptions, TrainReport, Trainer,
    ZeroColumns,
};
