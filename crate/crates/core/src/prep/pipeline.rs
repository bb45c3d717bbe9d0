use rayon::prelude::*;

use super::{
    covariance_to_correlation, ledoit_wolf, threshold_edges, window_split, GraphSample, SubjectRecord,
};
use crate::error::Result;

/// Recorded in results metadata: graphs are estimated from each sample's own window.
pub const ADJACENCY_SOURCE: &str = "per_window";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrepConfig {
    pub windows_per_scan: usize,
    pub threshold_percent: f64,
}

/// Windows every record and attaches a Ledoit-Wolf correlation graph computed
/// from the same (scaled) window. Output order follows subjects, then scans,
/// then windows.
pub fn prepare_samples(records: &[SubjectRecord], cfg: PrepConfig) -> Result<Vec<GraphSample>> {
    let per_subject: Vec<Vec<GraphSample>> = records
        .par_iter()
        .map(|rec| {
            window_split(rec, cfg.windows_per_scan)?
                .into_iter()
                .map(|window| {
                    let observations = window.features.transpose();
                    let lw = ledoit_wolf(&observations)?;
                    let correlation = covariance_to_correlation(&lw.covariance)?;
                    let adjacency = threshold_edges(&correlation, cfg.threshold_percent)?;
                    Ok(GraphSample {
                        window,
                        correlation,
                        adjacency,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_subject.into_iter().flatten().collect())
}
