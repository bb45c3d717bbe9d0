use rand::Rng;

use super::EncoderSpec;
use crate::diffengine::layers::{Conv1d, Linear, WeightNormConv1d};
use crate::diffengine::{Conv1dGeometry, Element, ParamStore, Tape, Var};
use crate::error::Result;

/// Strided causal blocks with growing dilation. Each block computes
/// `relu(dropout(relu(wn_conv(x))) + proj(x))`, where `proj` is a strided 1×1
/// convolution. Output position `t` of a block reads inputs at or before `stride·t`.
#[derive(Clone, Debug)]
pub struct TcnEncoder {
    pub spec: EncoderSpec,
    pub dropout: f64,
    convs: Vec<WeightNormConv1d>,
    residuals: Vec<Conv1d>,
    proj: Linear,
}

/// Intermediate activations of one TCN pass.
#[derive(Clone, Debug)]
pub struct TcnTrace {
    /// Conv path of each block before the residual sum.
    pub pre_residual: Vec<Var>,
    pub blocks: Vec<Var>,
    pub embedding: Var,
}

impl TcnEncoder {
    pub fn new<F: Element, R: Rng + ?Sized>(
        spec: &EncoderSpec,
        dropout: f64,
        store: &mut ParamStore<F>,
        rng: &mut R,
    ) -> Result<Self> {
        let flat = spec.flatten_dim()?;
        let mut convs = Vec::new();
        let mut residuals = Vec::new();
        for (i, pair) in spec.channels.windows(2).enumerate() {
            let d = spec.dilations[i];
            convs.push(WeightNormConv1d::new(
                store,
                &format!("encoder.block{i}.conv"),
                pair[0],
                pair[1],
                spec.kernel,
                Conv1dGeometry::causal(spec.kernel, spec.stride, d),
                rng,
            ));
            residuals.push(Conv1d::new(
                store,
                &format!("encoder.block{i}.downsample"),
                pair[0],
                pair[1],
                1,
                Conv1dGeometry::symmetric(spec.stride, 0, 1),
                rng,
            ));
        }
        let proj = Linear::new(store, "encoder.proj", flat, spec.embed_dim, rng);
        Ok(TcnEncoder {
            spec: spec.clone(),
            dropout,
            convs,
            residuals,
            proj,
        })
    }

    pub fn trace<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        mut x: Var,
    ) -> Result<TcnTrace> {
        let mut pre_residual = Vec::new();
        let mut blocks = Vec::new();
        for (conv, res) in self.convs.iter().zip(&self.residuals) {
            let h = conv.forward(tape, store, x)?;
            let h = tape.relu(h);
            let h = tape.dropout(h, self.dropout)?;
            pre_residual.push(h);
            let skip = res.forward(tape, store, x)?;
            let sum = tape.add(h, skip)?;
            x = tape.relu(sum);
            blocks.push(x);
        }
        let flat = tape.flatten(x)?;
        let embedding = self.proj.forward(tape, store, flat)?;
        Ok(TcnTrace {
            pre_residual,
            blocks,
            embedding,
        })
    }

    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &ParamStore<F>,
        x: Var,
    ) -> Result<Var> {
        Ok(self.trace(tape, store, x)?.embedding)
    }
}
