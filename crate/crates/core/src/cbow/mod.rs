//! CBOW training with negative sampling and a scale-`beta` random window.

mod config;
mod embedding;
mod matrix;
pub mod objective;
mod sampler;
mod train;

pub use config::{ContextMode, TrainConfig};
pub use embedding::{init_embedding, score, softmax, softmax_posterior, Embedding, Provenance};
pub use matrix::Matrix;
pub use objective::{ns_gradients, NsGradients};
pub use sampler::{sample_window, window_inclusion_prob, NegativeSampler, UNIGRAM_POWER};
pub use train::{train, train_epoch, train_step, LearningRate, Progress, ProgressFn, TrainReport, TrainStats};
