//! The preference scorer `f`: a residual feed-forward network trained with
//! the margin ranking loss.
//!
//! Everything is hand-rolled on top of `ndarray`: forward pass, reverse-mode
//! gradients through batch normalization, Adam, and the epoch loop with
//! plateau scheduling and early stopping.

mod adam;
mod checkpoint;
mod loss;
mod net;
mod params;
mod train;

pub use adam::{Adam, AdamConfig};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use loss::mrl_loss;
pub use net::{
    BatchStats, Mode, NetShape, PairBatch, PreferenceNet, RunningStats, BN_EPS, BN_MOMENTUM,
};
pub use params::{BatchNorm, Linear, ParamKind, Params, ResidualBlock, Tensor, TensorMut};
pub use train::{inference_loss, train, EpochRecord, TrainConfig, TrainReport};

use thiserror::Error;

use crate::corpus::HeadlineId;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input has dimension {found}, network expects {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("pair batch is empty or its sides differ in length")]
    EmptyBatch,
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("headline {0} is not in the corpus")]
    UnknownHeadline(HeadlineId),
    #[error("non-finite gradient; training diverged")]
    NonFiniteGradient,
    #[error("non-finite parameters after update; training diverged")]
    NonFiniteParameters,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for ModelError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}
