use std::collections::{BTreeMap, BTreeSet};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{bce, fit_logistic, flat_features, BASELINE_L2};
use super::folds::{plan_folds, subject_labels, FoldPlan, InnerRole};
use super::grid::{HyperGrid, HyperParams};
use super::metrics::{compute_metrics, RocPoint, DECISION_THRESHOLD};
use super::train::{predict_all, select_best, train_model, EpochLoss, GridPointSummary, TrainSettings};
use super::derive_seed;
use crate::diffengine::Element;
use crate::encoders::EncoderKind;
use crate::error::{Error, Result};
use crate::prep::{balance_by_subject, prepare_samples, GraphSample, PrepConfig, SubjectRecord, ADJACENCY_SOURCE};
use crate::zoo::{encode_checkpoint, Model, ModelSpec, Pooling, EMBED_DIM};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Estimator {
    Deep {
        encoder: EncoderKind,
        use_gcn: bool,
        pooling: Pooling,
    },
    /// Logistic regression on flattened correlations or binarized edges.
    Logistic { binarize: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub model: String,
    pub estimator: Estimator,
    pub threshold_percent: f64,
    pub windows_per_scan: usize,
    pub folds: usize,
    pub grid: HyperGrid,
    pub seed: u64,
    pub select_final_epoch: bool,
    pub permute_labels: bool,
    pub precision: Precision,
    /// Worker threads; does not affect results.
    #[serde(skip)]
    pub jobs: usize,
    /// Record wall-clock time and a timestamp in the report.
    #[serde(skip)]
    pub record_time: bool,
    /// Return encoded checkpoints of the selected model per fold.
    #[serde(skip)]
    pub keep_models: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub subjects_loaded: usize,
    pub subjects_used: usize,
    pub samples: usize,
    pub n_nodes: usize,
    pub window_length: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogisticCandidate {
    pub l2: f64,
    pub val_loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Selection {
    Deep {
        grid_index: usize,
        params: HyperParams,
        epoch: usize,
        val_loss: f64,
        grid: Vec<GridPointSummary>,
        history: Vec<EpochLoss>,
    },
    Logistic {
        l2: f64,
        val_loss: f64,
        candidates: Vec<LogisticCandidate>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub test_subjects: usize,
    pub train_subjects: usize,
    pub validation_subjects: usize,
    pub test_samples: usize,
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub selection: Selection,
    pub roc: Vec<RocPoint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Sample standard deviation (divisor `n - 1`); zero for a single value.
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let sd = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        MeanSd { mean, sd }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub auc: MeanSd,
    pub sensitivity: MeanSd,
    pub specificity: MeanSd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub seed: u64,
    pub adjacency_source: String,
    pub dataset: DatasetSummary,
    pub parameter_count: Option<usize>,
    pub folds: Vec<FoldReport>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timestamp_unix: Option<u64>,
}

impl ExperimentReport {
    /// `0.701 (0.037)`-style row: model, AUC, sensitivity, specificity, parameters.
    pub fn table_row(&self) -> String {
        let f = |m: MeanSd| format!("{:.3} ({:.3})", m.mean, m.sd);
        format!(
            "{} & {} & {} & {} & {}",
            self.config.model,
            f(self.aggregate.auc),
            f(self.aggregate.sensitivity),
            f(self.aggregate.specificity),
            self.parameter_count.map_or("-".to_string(), |p| p.to_string())
        )
    }
}

pub struct ExperimentOutput {
    pub report: ExperimentReport,
    /// Encoded checkpoints of each fold's selected model, when requested.
    pub models: Vec<Vec<u8>>,
}

/// Reassigns labels across subjects by a seeded shuffle, keeping class counts.
pub fn permute_labels(records: &mut [SubjectRecord], seed: u64) {
    let mut labels: Vec<_> = records.iter().map(|r| r.label).collect();
    labels.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    for (r, l) in records.iter_mut().zip(labels) {
        r.label = l;
    }
}

struct FoldData<'a> {
    train: Vec<&'a GraphSample>,
    val: Vec<&'a GraphSample>,
    test: Vec<&'a GraphSample>,
    counts: (usize, usize, usize),
}

fn split_fold<'a>(samples: &'a [GraphSample], plan: &FoldPlan, fold: usize) -> Result<FoldData<'a>> {
    let test_ids = plan.test_subjects(fold);
    let train_ids = plan.inner_subjects(fold, InnerRole::Train);
    let val_ids = plan.inner_subjects(fold, InnerRole::Validation);
    let pick = |ids: &BTreeSet<&str>| -> Vec<&'a GraphSample> {
        samples.iter().filter(|s| ids.contains(s.window.subject_id.as_str())).collect()
    };
    let data = FoldData {
        train: pick(&train_ids),
        val: pick(&val_ids),
        test: pick(&test_ids),
        counts: (test_ids.len(), train_ids.len(), val_ids.len()),
    };
    // runtime leakage guard on the samples actually used
    let subjects = |v: &[&GraphSample]| -> BTreeSet<String> { v.iter().map(|s| s.window.subject_id.clone()).collect() };
    let (a, b, c) = (subjects(&data.train), subjects(&data.val), subjects(&data.test));
    if !a.is_disjoint(&b) || !a.is_disjoint(&c) || !b.is_disjoint(&c) {
        return Err(Error::Harness(format!("subject leakage in fold {fold}")));
    }
    Ok(data)
}

fn labels_of(samples: &[&GraphSample]) -> Vec<bool> {
    samples.iter().map(|s| s.label() == crate::prep::Label::Positive).collect()
}

struct DeepJob {
    summary: GridPointSummary,
    history: Vec<EpochLoss>,
    scores: Option<Vec<f64>>,
    checkpoint: Option<Vec<u8>>,
}

fn run_deep_job<F: Element>(
    spec: &ModelSpec,
    params: HyperParams,
    index: usize,
    settings: TrainSettings,
    data: &FoldData,
    keep_model: bool,
) -> DeepJob {
    let r = train_model::<F>(spec, params, settings, &data.train, &data.val).and_then(|mut o| {
        let scores = predict_all(&mut o.model, &data.test, settings.batch_size)?;
        let ckpt = if keep_model { Some(encode_checkpoint(&o.model)?) } else { None };
        Ok((o, scores, ckpt))
    });
    let summary = GridPointSummary::from_result(index, params, &r, |(o, _, _)| (o.selected_val_loss, o.selected_epoch));
    if let Err(e) = &r {
        log::warn!("grid point {index} failed: {e}");
    }
    match r {
        Ok((o, scores, checkpoint)) => DeepJob { summary, history: o.history, scores: Some(scores), checkpoint },
        Err(_) => DeepJob { summary, history: Vec::new(), scores: None, checkpoint: None },
    }
}

fn fold_report(fold: usize, data: &FoldData, scores: &[f64], selection: Selection) -> Result<FoldReport> {
    let m = compute_metrics(scores, &labels_of(&data.test), DECISION_THRESHOLD)?;
    Ok(FoldReport {
        fold,
        test_subjects: data.counts.0,
        train_subjects: data.counts.1,
        validation_subjects: data.counts.2,
        test_samples: data.test.len(),
        auc: m.auc,
        sensitivity: m.sensitivity,
        specificity: m.specificity,
        selection,
        roc: m.roc,
    })
}

fn run_deep<F: Element>(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    folds: &[FoldData],
) -> Result<(Vec<FoldReport>, Vec<Vec<u8>>)> {
    let jobs: Vec<(usize, usize)> = (0..folds.len())
        .flat_map(|f| (0..config.grid.len()).map(move |g| (f, g)))
        .collect();
    let results: Vec<DeepJob> = jobs
        .par_iter()
        .map(|&(f, g)| {
            let settings = TrainSettings {
                epochs: config.grid.epochs,
                batch_size: config.grid.batch_size,
                select_final_epoch: config.select_final_epoch,
                seed: derive_seed(config.seed, f as u64, g as u64),
            };
            log::info!("fold {f}, grid point {g}: training");
            run_deep_job::<F>(spec, config.grid.points[g], g, settings, &folds[f], config.keep_models)
        })
        .collect();
    let mut by_fold: Vec<Vec<DeepJob>> = (0..folds.len()).map(|_| Vec::new()).collect();
    for ((f, _), r) in jobs.iter().zip(results) {
        by_fold[*f].push(r);
    }
    let mut reports = Vec::with_capacity(folds.len());
    let mut models = Vec::new();
    for (f, mut fold_jobs) in by_fold.into_iter().enumerate() {
        let summaries: Vec<GridPointSummary> = fold_jobs.iter().map(|j| j.summary.clone()).collect();
        let best = select_best(&summaries).map_err(|e| Error::Harness(format!("fold {f}: {e}")))?;
        let job = fold_jobs.swap_remove(best);
        let selection = Selection::Deep {
            grid_index: best,
            params: job.summary.params,
            epoch: job.summary.epoch.expect("successful point"),
            val_loss: job.summary.val_loss.expect("successful point"),
            grid: summaries,
            history: job.history,
        };
        reports.push(fold_report(f, &folds[f], job.scores.as_deref().expect("successful point"), selection)?);
        models.extend(job.checkpoint);
    }
    Ok((reports, models))
}

fn run_logistic(config: &ExperimentConfig, binarize: bool, folds: &[FoldData]) -> Result<Vec<FoldReport>> {
    folds
        .par_iter()
        .enumerate()
        .map(|(f, data)| {
            let feats = |v: &[&GraphSample]| -> Vec<Vec<f64>> { v.iter().map(|s| flat_features(s, binarize)).collect() };
            let targets = |v: &[&GraphSample]| -> Vec<f64> { v.iter().map(|s| s.label().as_f64()).collect() };
            let (xt, yt) = (feats(&data.train), targets(&data.train));
            let (xv, yv) = (feats(&data.val), targets(&data.val));
            let mut candidates = Vec::new();
            let mut fitted = Vec::new();
            for &l2 in &BASELINE_L2 {
                let m = fit_logistic(&xt, &yt, l2)?;
                candidates.push(LogisticCandidate { l2, val_loss: bce(&m.predict(&xv), &yv) });
                fitted.push(m);
            }
            let mut best = 0;
            for (i, c) in candidates.iter().enumerate() {
                if c.val_loss < candidates[best].val_loss {
                    best = i;
                }
            }
            let scores = fitted[best].predict(&feats(&data.test));
            let selection = Selection::Logistic {
                l2: candidates[best].l2,
                val_loss: candidates[best].val_loss,
                candidates,
            };
            let _ = config;
            fold_report(f, data, &scores, selection)
        })
        .collect()
}

/// Balances, windows and thresholds the records, plans folds, runs the
/// (fold, grid point) jobs on `config.jobs` threads and aggregates.
pub fn run_experiment(records: Vec<SubjectRecord>, config: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let subjects_loaded = records.len();
    let mut records = records;
    if config.permute_labels {
        permute_labels(&mut records, derive_seed(config.seed, u64::MAX, 1));
    }
    let records = balance_by_subject(records, config.seed)?;
    let prep = PrepConfig {
        windows_per_scan: config.windows_per_scan,
        threshold_percent: config.threshold_percent,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.jobs)
        .build()
        .map_err(|e| Error::Harness(format!("thread pool: {e}")))?;
    pool.install(|| {
        let samples = prepare_samples(&records, prep)?;
        let first = samples.first().ok_or_else(|| Error::Harness("dataset produced no samples".into()))?;
        let (n_nodes, window_length) = (first.n_nodes(), first.length());
        let plan = plan_folds(&subject_labels(&samples)?, config.folds, config.seed)?;
        let folds = (0..config.folds).map(|f| split_fold(&samples, &plan, f)).collect::<Result<Vec<_>>>()?;

        let (reports, models, parameter_count) = match &config.estimator {
            Estimator::Deep { encoder, use_gcn, pooling } => {
                let spec = ModelSpec {
                    encoder: *encoder,
                    use_gcn: *use_gcn,
                    pooling: *pooling,
                    threshold_percent: config.threshold_percent,
                    windows_per_scan: config.windows_per_scan,
                    embed_dim: EMBED_DIM,
                    dropout: 0.0,
                    seed: config.seed,
                    input_length: window_length,
                    n_nodes,
                };
                spec.validate()?;
                let count = Model::<f32>::build(&spec)?.parameter_count();
                let (r, m) = match config.precision {
                    Precision::F32 => run_deep::<f32>(config, &spec, &folds)?,
                    Precision::F64 => run_deep::<f64>(config, &spec, &folds)?,
                };
                (r, m, Some(count))
            }
            Estimator::Logistic { binarize } => (run_logistic(config, *binarize, &folds)?, Vec::new(), None),
        };

        let collect = |f: fn(&FoldReport) -> f64| MeanSd::of(&reports.iter().map(f).collect::<Vec<_>>());
        let aggregate = Aggregate {
            auc: collect(|r| r.auc),
            sensitivity: collect(|r| r.sensitivity),
            specificity: collect(|r| r.specificity),
        };
        let report = ExperimentReport {
            config: config.clone(),
            seed: config.seed,
            adjacency_source: ADJACENCY_SOURCE.to_string(),
            dataset: DatasetSummary {
                subjects_loaded,
                subjects_used: records.len(),
                samples: samples.len(),
                n_nodes,
                window_length,
            },
            parameter_count,
            folds: reports,
            aggregate,
            wall_clock_seconds: config.record_time.then(|| start.elapsed().as_secs_f64()),
            timestamp_unix: config
                .record_time
                .then(|| SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)),
        };
        Ok(ExperimentOutput { report, models })
    })
}

/// Subject count per class of a record list.
pub fn class_counts(records: &[SubjectRecord]) -> BTreeMap<u8, usize> {
    let mut out = BTreeMap::new();
    for r in records {
        *out.entry(r.label as u8).or_insert(0) += 1;
    }
    out
}
