//! Exact machine unlearning for implicit-feedback recommenders.
//!
//! Training interactions are split into balanced shards, one submodel is
//! trained per shard, and an attention-based aggregator combines the shard
//! embeddings into a single model. Deleting an interaction retrains only the
//! owning shard's submodel and the aggregator.

pub mod aggregation;
pub mod artifacts;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod models;
pub mod partition;
pub mod synthetic;
pub mod unlearn;

pub use dataset::{Dataset, Interaction};
pub use error::{Error, Result};
pub use models::{EmbeddingTable, ModelKind, TrainConfig};
pub use aggregation::AggMode;
pub use partition::Strategy;
pub use unlearn::{PipelineConfig, PipelineState, UnlearnRequest};
