//! A small dense-tensor engine with hand-derived backward passes: the
//! CNN-LSTM sequence classifier, the dense MLP baseline, categorical
//! cross-entropy, and Adam, plus their deterministic training loops.

pub mod adam;
pub mod cnn_lstm;
pub mod mlp;
pub mod tensor;
pub mod train;

pub use adam::{AdamConfig, AdamState};
pub use cnn_lstm::{build_model, ModelSpec, TrainMeta, TrainedModel, PARAM_NAMES};
pub use mlp::{build_mlp, MlpModel, MlpSpec, MLP_PARAM_NAMES};
pub use tensor::Tensor;
pub use train::{train, train_mlp, TrainConfig};
