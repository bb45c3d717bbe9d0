use serde::{Deserialize, Serialize};

use crate::encoders::EncoderKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub dropout: f64,
    pub lr: f64,
    pub weight_decay: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperGrid {
    pub points: Vec<HyperParams>,
    pub epochs: usize,
    pub batch_size: usize,
}

pub const GRID_DROPOUT: [f64; 3] = [0.0, 0.5, 0.7];
pub const GRID_LR: [f64; 3] = [1e-4, 1e-5, 1e-6];
pub const GRID_WEIGHT_DECAY: [f64; 3] = [0.005, 0.5, 0.0];
pub const DEFAULT_EPOCHS: usize = 30;

/// Batch size used for a given encoder and number of samples per subject.
pub fn default_batch_size(encoder: EncoderKind, splits: usize) -> usize {
    if splits > 4 {
        1000
    } else if encoder == EncoderKind::Tcn {
        400
    } else {
        500
    }
}

impl HyperGrid {
    /// Cartesian product, dropout varying slowest and weight decay fastest.
    pub fn product(dropout: &[f64], lr: &[f64], weight_decay: &[f64], epochs: usize, batch_size: usize) -> Self {
        let mut points = Vec::with_capacity(dropout.len() * lr.len() * weight_decay.len());
        for &d in dropout {
            for &l in lr {
                for &w in weight_decay {
                    points.push(HyperParams {
                        dropout: d,
                        lr: l,
                        weight_decay: w,
                    });
                }
            }
        }
        HyperGrid {
            points,
            epochs,
            batch_size,
        }
    }

    /// The full 27-point search.
    pub fn full(encoder: EncoderKind, splits: usize) -> Self {
        Self::product(
            &GRID_DROPOUT,
            &GRID_LR,
            &GRID_WEIGHT_DECAY,
            DEFAULT_EPOCHS,
            default_batch_size(encoder, splits),
        )
    }

    /// Single point sized for small synthetic datasets.
    pub fn fast() -> Self {
        Self::product(&[0.0], &[1e-3], &[0.0], DEFAULT_EPOCHS, 16)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}
