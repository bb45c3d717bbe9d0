//! Per-node temporal encoders: four strided 1-D convolution blocks, flatten,
//! then a linear map to a fixed-width embedding.

mod cnn;
mod tcn;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use cnn::CnnEncoder;
pub use tcn::{TcnEncoder, TcnTrace};

use crate::diffengine::{conv_output_len, Element, ParamStore, Tape, Var};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Cnn,
    Tcn,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderSpec {
    pub kind: EncoderKind,
    pub kernel: usize,
    /// Input channel count followed by the output channels of each layer.
    pub channels: Vec<usize>,
    pub stride: usize,
    /// Symmetric padding for the CNN; the TCN pads causally instead.
    pub padding: usize,
    pub dilations: Vec<usize>,
    pub embed_dim: usize,
    pub input_length: usize,
}

/// Smallest input that survives four stride-2 halvings.
pub const MIN_INPUT_LENGTH: usize = 16;

impl EncoderSpec {
    pub fn cnn(input_length: usize) -> Self {
        EncoderSpec {
            kind: EncoderKind::Cnn,
            kernel: 7,
            channels: vec![1, 8, 16, 32, 64],
            stride: 2,
            padding: 3,
            dilations: vec![1, 1, 1, 1],
            embed_dim: 256,
            input_length,
        }
    }

    pub fn tcn(input_length: usize) -> Self {
        EncoderSpec {
            kind: EncoderKind::Tcn,
            dilations: vec![1, 2, 4, 8],
            ..Self::cnn(input_length)
        }
    }

    pub fn for_kind(kind: EncoderKind, input_length: usize) -> Self {
        match kind {
            EncoderKind::Cnn => Self::cnn(input_length),
            EncoderKind::Tcn => Self::tcn(input_length),
        }
    }

    pub fn n_layers(&self) -> usize {
        self.channels.len() - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() < 2 || self.dilations.len() != self.n_layers() {
            return Err(Error::Config(format!(
                "{} channel entries need {} dilations, got {}",
                self.channels.len(),
                self.channels.len().saturating_sub(1),
                self.dilations.len()
            )));
        }
        if self.embed_dim == 0 {
            return Err(Error::Config("embedding width must be positive".into()));
        }
        let min = self.stride.pow(self.n_layers() as u32);
        if self.input_length < min {
            return Err(Error::Geometry(format!(
                "input length {} is too short for {} stride-{} layers (need >= {min})",
                self.input_length,
                self.n_layers(),
                self.stride
            )));
        }
        Ok(())
    }

    /// Sequence length after each layer.
    pub fn layer_lengths(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let mut len = self.input_length;
        let mut out = Vec::with_capacity(self.n_layers());
        for &d in &self.dilations {
            let pad = match self.kind {
                EncoderKind::Cnn => 2 * self.padding,
                EncoderKind::Tcn => (self.kernel - 1) * d,
            };
            len = conv_output_len(len, self.kernel, self.stride, pad, d)?;
            out.push(len);
        }
        Ok(out)
    }

    /// Width of the flattened final feature map.
    pub fn flatten_dim(&self) -> Result<usize> {
        let last = *self.layer_lengths()?.last().unwrap();
        Ok(last * self.channels.last().unwrap())
    }
}

#[derive(Clone, Debug)]
pub enum TemporalEncoder {
    Cnn(CnnEncoder),
    Tcn(TcnEncoder),
}

impl TemporalEncoder {
    pub fn build<F: Element, R: Rng + ?Sized>(
        spec: &EncoderSpec,
        dropout: f64,
        store: &mut ParamStore<F>,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(match spec.kind {
            EncoderKind::Cnn => TemporalEncoder::Cnn(CnnEncoder::new(spec, store, rng)?),
            EncoderKind::Tcn => TemporalEncoder::Tcn(TcnEncoder::new(spec, dropout, store, rng)?),
        })
    }

    pub fn spec(&self) -> &EncoderSpec {
        match self {
            TemporalEncoder::Cnn(e) => &e.spec,
            TemporalEncoder::Tcn(e) => &e.spec,
        }
    }

    /// `[rows, 1, T] -> [rows, embed_dim]`.
    pub fn forward<F: Element>(
        &self,
        tape: &mut Tape<F>,
        store: &mut ParamStore<F>,
        x: Var,
    ) -> Result<Var> {
        let s = tape.shape(x);
        let spec = self.spec();
        if s.len() != 3 || s[1] != spec.channels[0] || s[2] != spec.input_length {
            return Err(Error::dim(
                "encoder",
                format!(
                    "input {:?}, expected [rows, {}, {}]",
                    s, spec.channels[0], spec.input_length
                ),
            ));
        }
        match self {
            TemporalEncoder::Cnn(e) => e.forward(tape, store, x),
            TemporalEncoder::Tcn(e) => e.forward(tape, store, x),
        }
    }
}
