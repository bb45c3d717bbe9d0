use serde::{Deserialize, Serialize};

use super::name::{ModelName, Pooling};
use crate::encoders::{EncoderKind, EncoderSpec};
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD_PERCENT: f64 = 5.0;
pub const EMBED_DIM: usize = 256;
/// Pooling levels in the DiffPool stack.
pub const DIFFPOOL_LEVELS: usize = 2;

/// Merges a threshold carried by a model name with a requested one; they must
/// agree when both are present.
pub fn resolve_threshold(from_name: Option<f64>, requested: Option<f64>) -> Result<f64> {
    match (from_name, requested) {
        (Some(a), Some(b)) if a != b => Err(Error::Config(format!(
            "model name fixes the threshold at {a}%, but {b}% was requested"
        ))),
        (Some(a), _) | (None, Some(a)) => Ok(a),
        (None, None) => Ok(DEFAULT_THRESHOLD_PERCENT),
    }
}

/// Everything needed to rebuild a model bit-for-bit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub encoder: EncoderKind,
    pub use_gcn: bool,
    pub pooling: Pooling,
    pub threshold_percent: f64,
    pub windows_per_scan: usize,
    pub embed_dim: usize,
    pub dropout: f64,
    pub seed: u64,
    pub input_length: usize,
    pub n_nodes: usize,
}

impl ModelSpec {
    /// Spec for a parsed name. `threshold` fills in a threshold the name omits
    /// and must agree with one it carries.
    pub fn from_name(
        name: &ModelName,
        threshold: Option<f64>,
        windows_per_scan: usize,
        input_length: usize,
        n_nodes: usize,
    ) -> Result<Self> {
        let threshold_percent = resolve_threshold(name.threshold_percent, threshold)?;
        let spec = ModelSpec {
            encoder: name.encoder,
            use_gcn: name.use_gcn,
            pooling: name.pooling,
            threshold_percent,
            windows_per_scan,
            embed_dim: EMBED_DIM,
            dropout: 0.0,
            seed: 0,
            input_length,
            n_nodes,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn encoder_spec(&self) -> EncoderSpec {
        EncoderSpec {
            embed_dim: self.embed_dim,
            ..EncoderSpec::for_kind(self.encoder, self.input_length)
        }
    }

    /// Whether the forward pass consumes an adjacency matrix.
    pub fn uses_graph(&self) -> bool {
        self.use_gcn || self.pooling == Pooling::DiffPool
    }

    pub fn name(&self) -> ModelName {
        ModelName {
            pooling: self.pooling,
            encoder: self.encoder,
            use_gcn: self.use_gcn,
            threshold_percent: self.uses_graph().then_some(self.threshold_percent),
            splits: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold_percent > 0.0 && self.threshold_percent <= 100.0) {
            return Err(Error::Config(format!(
                "threshold must lie in (0, 100], got {}",
                self.threshold_percent
            )));
        }
        if self.windows_per_scan == 0 {
            return Err(Error::Config("windows per scan must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout must lie in [0, 1), got {}", self.dropout)));
        }
        if self.n_nodes == 0 {
            return Err(Error::Config("model needs at least one node".into()));
        }
        if self.pooling == Pooling::DiffPool && self.n_nodes < 2 {
            return Err(Error::Config("hierarchical pooling needs at least two nodes".into()));
        }
        self.encoder_spec().validate()
    }
}
