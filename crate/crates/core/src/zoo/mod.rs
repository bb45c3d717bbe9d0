//! Full architectures: temporal encoder per node, optional GCN, mean or
//! hierarchical pooling, and a sigmoid head.

mod checkpoint;
mod model;
mod name;
mod spec;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use model::{
    ForwardOutput, GraphBatch, Model, PredictionHead, StepStats, ENTROPY_LOSS_WEIGHT, LINK_LOSS_WEIGHT,
};
pub use name::{ModelName, Pooling};
pub use spec::{resolve_threshold, ModelSpec, DEFAULT_THRESHOLD_PERCENT, DIFFPOOL_LEVELS, EMBED_DIM};

#[cfg(test)]
mod tests;
