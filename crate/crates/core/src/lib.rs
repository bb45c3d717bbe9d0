//! Spatio-temporal graph classification of node timeseries.
//!
//! The pipeline encodes every node's timeseries with a 1-D convolutional
//! network, optionally shares information across a correlation-derived graph
//! with a graph convolution, pools nodes (global mean or learned hierarchical
//! clustering) and predicts a binary label. Evaluation follows a nested,
//! subject-grouped, stratified cross-validation protocol.

pub mod diffengine;
pub mod encoders;
pub mod error;
pub mod graph;
pub mod harness;
pub mod prep;
pub mod synth;
pub mod zoo;

pub use diffengine::{Adam, Element, Mode, ParamStore, Tape, Tensor, Var};
pub use error::{Error, Result};
