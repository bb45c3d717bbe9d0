//! Differentiable operations recorded on a [`Tape`](super::Tape).

mod activation;
mod basic;
mod conv;
mod graph;
mod loss;
mod norm;

pub use conv::{conv_output_len, Conv1dGeometry};
pub use loss::PROB_CLAMP;
pub use norm::{BatchStats, WEIGHT_NORM_EPS};
