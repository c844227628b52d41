//! The learning method: encoder triple (agent head, object head,
//! contrastive head), the equivariance / invariance / segment / InfoNCE
//! losses, the per-batch Otsu interaction split, and the training loop.

mod checkpoint;
mod encoder;
pub(crate) mod losses;
mod otsu;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use encoder::{EncoderConfig, EncoderTriple, Encoding};
pub use losses::{
    infonce_z_logits, loss_infonce, loss_int, loss_minus_deterministic, loss_minus_stochastic,
    loss_plus_deterministic, loss_plus_stochastic, segment_points, KlMode,
};
pub use otsu::{log_distances, otsu_split, BatchClasses, Class};
pub use train::{
    batch_loss, batch_loss_and_grads, contrastive_distances, split_dataset, train, train_with,
    BatchLossTerms, EpochMetrics, LossConfig, LossMode, LossSelect, TrainConfig, TrainOptions,
    TrainOutcome, TripleGrads,
};

use crate::diff::DiffError;
use crate::geom::GeomError;
use crate::textio::TextError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReprError {
    #[error("batch of {0} is too small (need at least 2 triples)")]
    BatchTooSmall(usize),
    #[error("{what}: expected {expected}, got {got}")]
    DimMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss {
        epoch: usize,
        batch: usize,
        detail: String,
    },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid train config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error(transparent)]
    Geom(#[from] GeomError),
    #[error(transparent)]
    Text(#[from] TextError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
