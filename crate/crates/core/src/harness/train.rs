use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::{HyperGrid, HyperParams};
use super::derive_seed;
use crate::diffengine::{Adam, Element};
use crate::error::{Error, Result};
use crate::prep::GraphSample;
use crate::zoo::{GraphBatch, Model, ModelSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLoss {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub link_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub entropy: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    /// Keep the last epoch's weights instead of the best-validation ones.
    pub select_final_epoch: bool,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome<F: Element> {
    pub params: HyperParams,
    pub history: Vec<EpochLoss>,
    /// 1-based epoch whose weights the model holds.
    pub selected_epoch: usize,
    pub selected_val_loss: f64,
    pub model: Model<F>,
}

/// Splits `0..n` into batches of `size`; a trailing batch of one sample is
/// merged into its predecessor so batch statistics stay defined.
pub fn batch_ranges(n: usize, size: usize) -> Vec<std::ops::Range<usize>> {
    let size = size.max(1);
    let mut out: Vec<std::ops::Range<usize>> = (0..n).step_by(size).map(|s| s..(s + size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() == 1) {
        let last = out.pop().unwrap();
        out.last_mut().unwrap().end = last.end;
    }
    out
}

/// Mean eval-mode objective over `samples`, weighted by batch size.
pub fn mean_eval_loss<F: Element>(model: &mut Model<F>, samples: &[&GraphSample], batch_size: usize) -> Result<f64> {
    let mut total = 0.0;
    for r in batch_ranges(samples.len(), batch_size) {
        let batch = GraphBatch::from_samples(&samples[r.clone()])?;
        total += model.eval_loss(&batch)? * r.len() as f64;
    }
    Ok(total / samples.len() as f64)
}

pub fn predict_all<F: Element>(model: &mut Model<F>, samples: &[&GraphSample], batch_size: usize) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(samples.len());
    for r in batch_ranges(samples.len(), batch_size) {
        out.extend(model.predict(&GraphBatch::from_samples(&samples[r])?)?);
    }
    Ok(out)
}

/// Trains one model with Adam, evaluating the validation loss after every
/// epoch. Returns with the weights of the lowest-validation-loss epoch unless
/// `select_final_epoch` is set. A non-finite loss is a harness error.
pub fn train_model<F: Element>(
    spec: &ModelSpec,
    params: HyperParams,
    settings: TrainSettings,
    train: &[&GraphSample],
    val: &[&GraphSample],
) -> Result<TrainOutcome<F>> {
    if train.is_empty() || val.is_empty() {
        return Err(Error::Harness("training and validation sets must be non-empty".into()));
    }
    let mut spec = spec.clone();
    spec.dropout = params.dropout;
    spec.seed = settings.seed;
    let mut model = Model::<F>::build(&spec)?;
    let mut adam = Adam::new(params.lr, params.weight_decay);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(settings.seed, 1, 0));
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::with_capacity(settings.epochs);
    let mut best: Option<(usize, f64, Vec<crate::diffengine::Tensor<F>>)> = None;

    for epoch in 1..=settings.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut link, mut ent) = (0.0, 0.0, 0.0);
        let mut has_aux = false;
        for r in batch_ranges(order.len(), settings.batch_size) {
            let picked: Vec<&GraphSample> = order[r.clone()].iter().map(|&i| train[i]).collect();
            let batch = GraphBatch::from_samples(&picked)?;
            let stats = model.train_step(&mut adam, &batch, rng.gen())?;
            if !stats.loss.is_finite() {
                return Err(Error::Harness(format!("non-finite training loss at epoch {epoch}")));
            }
            let w = r.len() as f64;
            sum += stats.loss * w;
            if let (Some(l), Some(e)) = (stats.link_loss, stats.entropy) {
                has_aux = true;
                link += l * w;
                ent += e * w;
            }
        }
        let n = train.len() as f64;
        let val_loss = mean_eval_loss(&mut model, val, settings.batch_size)?;
        if !val_loss.is_finite() {
            return Err(Error::Harness(format!("non-finite validation loss at epoch {epoch}")));
        }
        let rec = EpochLoss {
            epoch,
            train_loss: sum / n,
            val_loss,
            link_loss: has_aux.then_some(link / n),
            entropy: has_aux.then_some(ent / n),
        };
        log::debug!(
            "epoch {epoch}: train {:.5} val {:.5}{}",
            rec.train_loss,
            rec.val_loss,
            rec.link_loss.map(|l| format!(" link {l:.5} entropy {:.5}", rec.entropy.unwrap())).unwrap_or_default()
        );
        history.push(rec);
        if !settings.select_final_epoch && best.as_ref().is_none_or(|b| val_loss < b.1) {
            best = Some((epoch, val_loss, model.store().snapshot()));
        }
    }

    let (selected_epoch, selected_val_loss) = match best {
        Some((epoch, loss, snap)) => {
            model.store_mut().restore(&snap);
            (epoch, loss)
        }
        None => {
            let last = history.last().ok_or_else(|| Error::Harness("zero training epochs".into()))?;
            (last.epoch, last.val_loss)
        }
    };
    Ok(TrainOutcome {
        params,
        history,
        selected_epoch,
        selected_val_loss,
        model,
    })
}

/// Summary of one grid point, kept for the results document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridPointSummary {
    pub index: usize,
    pub params: HyperParams,
    pub val_loss: Option<f64>,
    pub epoch: Option<usize>,
    pub error: Option<String>,
}

impl GridPointSummary {
    pub fn from_result<T>(index: usize, params: HyperParams, r: &Result<T>, val: impl Fn(&T) -> (f64, usize)) -> Self {
        match r {
            Ok(t) => {
                let (loss, epoch) = val(t);
                GridPointSummary { index, params, val_loss: Some(loss), epoch: Some(epoch), error: None }
            }
            Err(e) => GridPointSummary { index, params, val_loss: None, epoch: None, error: Some(e.to_string()) },
        }
    }
}

/// Index of the successful point with the lowest validation loss; ties go to
/// the earliest point.
pub fn select_best(summaries: &[GridPointSummary]) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    for s in summaries {
        if let Some(v) = s.val_loss {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((s.index, v));
            }
        }
    }
    best.map(|(i, _)| i).ok_or_else(|| Error::Harness("every grid point failed".into()))
}

pub struct GridSearchResult<F: Element> {
    pub selected: usize,
    pub summaries: Vec<GridPointSummary>,
    pub outcome: TrainOutcome<F>,
}

/// Trains every grid point in order and keeps the best one.
pub fn grid_search<F: Element>(
    spec: &ModelSpec,
    grid: &HyperGrid,
    seed: u64,
    select_final_epoch: bool,
    train: &[&GraphSample],
    val: &[&GraphSample],
) -> Result<GridSearchResult<F>> {
    let mut outcomes = Vec::with_capacity(grid.len());
    let mut summaries = Vec::with_capacity(grid.len());
    for (i, &p) in grid.points.iter().enumerate() {
        let settings = TrainSettings {
            epochs: grid.epochs,
            batch_size: grid.batch_size,
            select_final_epoch,
            seed: derive_seed(seed, 0, i as u64),
        };
        let r = train_model::<F>(spec, p, settings, train, val);
        summaries.push(GridPointSummary::from_result(i, p, &r, |o| (o.selected_val_loss, o.selected_epoch)));
        outcomes.push(r.ok());
    }
    let selected = select_best(&summaries)?;
    let outcome = outcomes.swap_remove(selected).expect("selected point succeeded");
    Ok(GridSearchResult {
        selected,
        summaries,
        outcome,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batching_merges_singletons() {
        assert_eq!(batch_ranges(10, 4), vec![0..4, 4..8, 8..10]);
        assert_eq!(batch_ranges(9, 4), vec![0..4, 4..9]);
        assert_eq!(batch_ranges(1, 4), vec![0..1]);
        assert_eq!(batch_ranges(0, 4), Vec::<std::ops::Range<usize>>::new());
    }

    fn summary(index: usize, v: Option<f64>) -> GridPointSummary {
        GridPointSummary {
            index,
            params: HyperParams { dropout: 0.0, lr: 1e-3, weight_decay: 0.0 },
            val_loss: v,
            epoch: v.map(|_| 1),
            error: v.is_none().then(|| "nan".into()),
        }
    }

    #[test]
    fn selection_rules() {
        assert_eq!(select_best(&[summary(0, Some(0.4))]).unwrap(), 0);
        assert_eq!(select_best(&[summary(0, Some(0.4)), summary(1, Some(0.4))]).unwrap(), 0);
        assert_eq!(select_best(&[summary(0, None), summary(1, Some(0.7)), summary(2, Some(0.5))]).unwrap(), 2);
        assert!(matches!(select_best(&[summary(0, None)]), Err(Error::Harness(_))));
    }
}
