//! Word-embedding laboratory for studying how the CBOW context-window
//! sampling scale shapes the structure of the learned embedding.
//!
//! The pipeline runs [`corpus`] (cleaning, vocabulary, token ids) into
//! [`cbow`] (negative-sampling CBOW training at a chosen maximal window
//! `beta`), which [`sweep`] repeats across a grid of scales and replicas.
//! The trained families are then analyzed by [`analogy`] (per-relation
//! accuracy curves) and [`neighbors`] (similarity curves, crossovers,
//! peak-scale histograms).

pub mod analogy;
pub mod cbow;
pub mod corpus;
mod error;
pub mod io;
pub mod neighbors;
pub mod peak;
pub mod sweep;

pub use cbow::{ContextMode, Embedding, Matrix, NegativeSampler, Provenance, TrainConfig};
pub use corpus::{CleanTokenStream, Vocabulary};
pub use error::{Error, Result};
pub use sweep::{CellKey, EmbeddingFamily, MemoryFamily, SweepPlan, SweepResult};
