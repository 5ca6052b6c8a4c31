//! Caption-to-image retrieval model: a word embedding layer feeding two
//! bidirectional LSTM layers and self-attention pooling on the caption side,
//! a linear projection on the image side, both L2 normalized into a shared
//! space and trained with a bidirectional batch hinge loss.

mod checkpoint;
mod loss;
mod model;
mod params;
mod retrieval;
mod schedule;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CheckpointError};
pub use loss::{batch_hinge_loss, hinge_loss_from_similarities};
pub use model::{attend, caption_states, encode_captions, encode_images, CaptionStates, EncodedCaptions};
pub use params::{BoundParams, GroundedModelParams, ModelDims, PARAM_NAMES};
pub use retrieval::{embed_corpus, recall_at_k, recall_from_embeddings, EmbeddedCorpus, RecallScores};
pub use schedule::{cyclic_lr, CyclicSchedule};
pub use train::{train, EpochLog, TrainConfig, TrainLog};

use crate::corpus::CorpusError;
use crate::tensor::TensorError;

#[derive(Debug, thiserror::Error)]
pub enum EncoderError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("feature vector has length {got}, expected {expected}")]
    FeatureLength { got: usize, expected: usize },
    #[error("caption needs at least 3 ids including start/end, got {0}")]
    CaptionTooShort(usize),
    #[error("unknown token id {0}")]
    UnknownTokenId(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("batch of {0} has no negatives; need at least 2 pairs")]
    BatchTooSmall(usize),
    #[error("empty evaluation set")]
    EmptyEvalSet,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
