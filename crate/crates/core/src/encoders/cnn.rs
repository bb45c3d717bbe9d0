use rand::Rng;

use super::EncoderSpec;
use crate::diffengine::layers::{BatchNorm1d, Conv1d, Linear};
use crate::diffengine::{Conv1dGeometry, Element, ParamStore, Tape, Var};
use crate::error::Result;

/// Four (conv → batch norm → relu) blocks, flatten, linear.
#[derive(Clone, Debug)]
pub struct CnnEncoder {
    pub spec: EncoderSpec,
    convs: Vec<Conv1d>,
    norms: Vec<BatchNorm1d>,
    proj: Linear,
}

impl CnnEncoder {
    pub fn new<F: Element, R: Rng + ?Sized>(
        spec: &EncoderSpec,
        store: &mut ParamStore<F>,
        rng: &mut R,
    ) -> Result<Self> {
        let flat = spec.flatten_dim()?;
        let mut convs = Vec::new();
        let mut norms = Vec::new();
        for (i, pair) in spec.channels.windows(2).enumerate() {
            let geom = Conv1dGeometry::symmetric(spec.stride, spec.padding, spec.dilations[i]);
            convs.push(Conv1d::new(
                store,
                &format!("encoder.conv{i}"),
                pair[0],
                pair[1],
                spec.kernel,
                geom,
                rng,
            ));
            norms.push(BatchNorm1d::new(store, &format!("encoder.bn{i}"), pair[1]));
        }
        let proj = Linear::new(store, "encoder.proj", flat, spec.embed_dim, rng);
        Ok(CnnEncoder {
            spec: spec.clone(),
            convs,
            norms,
            proj,
        })
    }

    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &mut ParamStore<F>,
        mut x: Var,
    ) -> Result<Var> {
        for (conv, bn) in self.convs.iter().zip(&self.norms) {
            x = conv.forward(tape, store, x)?;
            x = bn.forward(tape, store, x)?;
            x = tape.relu(x);
        }
        let flat = tape.flatten(x)?;
        self.proj.forward(tape, store, flat)
    }
}
