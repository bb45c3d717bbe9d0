//! Cross-validated evaluation: fold planning, grid search, metrics, the
//! logistic baseline and result documents.

pub mod baseline;
mod experiment;
mod folds;
mod grid;
mod metrics;
pub mod report;
mod train;

pub use experiment::{
    class_counts, permute_labels, run_experiment, Aggregate, DatasetSummary, Estimator, ExperimentConfig,
    ExperimentOutput, ExperimentReport, FoldReport, LogisticCandidate, MeanSd, Precision, Selection,
};
pub use folds::{plan_folds, subject_labels, FoldPlan, InnerRole, VALIDATION_FRACTION};
pub use grid::{default_batch_size, HyperGrid, HyperParams, GRID_DROPOUT, DEFAULT_EPOCHS, GRID_LR, GRID_WEIGHT_DECAY};
pub use metrics::{auc, compute_metrics, roc_curve, Metrics, RocPoint, DECISION_THRESHOLD};
pub use train::{
    batch_ranges, grid_search, mean_eval_loss, predict_all, select_best, train_model, EpochLoss, GridPointSummary,
    GridSearchResult, TrainOutcome, TrainSettings,
};

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent RNG stream for job `(a, b)` under a base seed.
pub fn derive_seed(seed: u64, a: u64, b: u64) -> u64 {
    seed ^ splitmix64(splitmix64(a) ^ b)
}
