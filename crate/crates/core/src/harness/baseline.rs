//! L2-regularized logistic regression on flattened correlation matrices.

use serde::{Deserialize, Serialize};

use crate::diffengine::{Adam, Mode, ParamStore, Tape, Tensor};
use crate::error::{Error, Result};
use crate::prep::GraphSample;

pub const BASELINE_L2: [f64; 3] = [1e-3, 1e-2, 1e-1];
pub const BASELINE_EPOCHS: usize = 300;
pub const BASELINE_LR: f64 = 1e-2;

/// Upper-triangle entries (`i < j`, row-major): correlations, or the
/// thresholded graph's edge indicators when `binarize` is set.
pub fn flat_features(sample: &GraphSample, binarize: bool) -> Vec<f64> {
    let n = sample.n_nodes();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push(if binarize {
                sample.adjacency.has_edge(i, j) as u8 as f64
            } else {
                sample.correlation[(i, j)]
            });
        }
    }
    out
}

/// Per-feature centering and scaling learned on the training rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let d = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v / n;
            }
        }
        let mut scale = vec![0.0; d];
        for r in rows {
            for ((s, v), m) in scale.iter_mut().zip(r).zip(&mean) {
                *s += (v - m).powi(2) / n;
            }
        }
        for s in &mut scale {
            *s = if *s > 1e-20 { s.sqrt() } else { 1.0 };
        }
        Standardizer { mean, scale }
    }

    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let mut out = Vec::with_capacity(rows.len() * self.mean.len());
        for r in rows {
            out.extend(r.iter().zip(&self.mean).zip(&self.scale).map(|((v, m), s)| (v - m) / s));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LogisticModel {
    pub standardizer: Standardizer,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LogisticModel {
    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        let x = self.standardizer.apply(rows);
        let d = self.weights.len();
        x.chunks(d.max(1))
            .take(rows.len())
            .map(|r| {
                let z: f64 = r.iter().zip(&self.weights).map(|(a, b)| a * b).sum::<f64>() + self.bias;
                1.0 / (1.0 + (-z).exp())
            })
            .collect()
    }
}

/// Mean cross-entropy of probabilities with the same clamp as the training loss.
pub fn bce(probs: &[f64], labels: &[f64]) -> f64 {
    let c = crate::diffengine::PROB_CLAMP;
    probs
        .iter()
        .zip(labels)
        .map(|(&p, &y)| {
            let p = p.clamp(c, 1.0 - c);
            -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
        })
        .sum::<f64>()
        / probs.len() as f64
}

/// Full-batch Adam on `mean BCE + l2·‖w‖²`, weights starting at zero.
pub fn fit_logistic(rows: &[Vec<f64>], labels: &[f64], l2: f64) -> Result<LogisticModel> {
    if rows.is_empty() || rows.len() != labels.len() {
        return Err(Error::Harness(format!("{} feature rows for {} labels", rows.len(), labels.len())));
    }
    let d = rows[0].len();
    let standardizer = Standardizer::fit(rows);
    let x = Tensor::new(vec![rows.len(), d], standardizer.apply(rows))?;
    let mut store = ParamStore::<f64>::new();
    let w = store.add_param("weight", Tensor::zeros(&[1, d]));
    let b = store.add_param("bias", Tensor::zeros(&[1]));
    let mut adam = Adam::new(BASELINE_LR, 0.0);
    for _ in 0..BASELINE_EPOCHS {
        let mut tape = Tape::new(Mode::Train, 0);
        let xv = tape.constant(x.clone());
        let wv = tape.param(&store, w);
        let bv = tape.param(&store, b);
        let z = tape.linear(xv, wv, Some(bv))?;
        let p = tape.sigmoid(z);
        let p = tape.reshape(p, &[rows.len()])?;
        let data = tape.bce_loss(p, labels)?;
        let sq = tape.sum_squares(wv);
        let pen = tape.scale(sq, l2);
        let loss = tape.add(data, pen)?;
        if !tape.value(loss).item().is_finite() {
            return Err(Error::Harness("non-finite baseline loss".into()));
        }
        tape.backward(loss)?.write_to(&mut store);
        adam.step(&mut store)?;
    }
    Ok(LogisticModel {
        standardizer,
        weights: store.value(w).data().to_vec(),
        bias: store.value(b).item(),
    })
}
