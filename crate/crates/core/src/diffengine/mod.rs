//! Dense tensors, reverse-mode differentiation and the Adam optimizer.

mod adam;
pub mod element;
pub mod gradcheck;
pub mod layers;
mod ops;
mod params;
mod tape;
mod tensor;

pub use adam::Adam;
pub use element::Element;
pub use ops::{conv_output_len, BatchStats, Conv1dGeometry, PROB_CLAMP, WEIGHT_NORM_EPS};
pub use params::{Param, ParamId, ParamStore};
pub use tape::{Gradients, Mode, Tape, Var};
pub use tensor::Tensor;
