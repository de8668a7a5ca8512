//! Word-embedding input, the CNN and LSTM reaction predictors, training and
//! evaluation.

mod embedding;
mod network;
mod train;

pub use embedding::{load_glove, EmbeddingTable, DEFAULT_DIM};
pub use network::{is_weight, Architecture, CnnConfig, FilterCount, LstmConfig, ModelKind, DEFAULT_MAX_LEN};
pub use train::{
    aggregate, cross_validate, longest_post, metrics, prepare_examples, train, CvSummary, EpochRecord, Example,
    History, Metrics, TrainConfig, TrainedModel,
};
