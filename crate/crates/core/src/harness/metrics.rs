use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability cut used for sensitivity and specificity.
pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold: f64,
    pub fpr: f64,
    pub tpr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub auc: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub roc: Vec<RocPoint>,
}

fn class_counts(labels: &[bool]) -> Result<(usize, usize)> {
    let pos = labels.iter().filter(|&&y| y).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Metric(format!(
            "need both classes, got {pos} positive and {neg} negative labels"
        )));
    }
    Ok((pos, neg))
}

fn check(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::Metric(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::Metric(format!("score {s} is not a number")));
    }
    class_counts(labels)
}

/// Area under the ROC curve from mid-ranks (tied pairs count one half).
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share their average
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Ok(u / (pos as f64 * neg as f64))
}

/// ROC points at every distinct score, thresholds descending. A sample counts
/// as positive when `score >= threshold`. The first point sits above the
/// largest score so the curve starts at (0, 0).
pub fn roc_curve(scores: &[f64], labels: &[bool]) -> Result<Vec<RocPoint>> {
    let (pos, neg) = check(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut points = vec![RocPoint {
        threshold: scores[order[0]] + 1.0,
        fpr: 0.0,
        tpr: 0.0,
    }];
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut i = 0;
    while i < order.len() {
        let thr = scores[order[i]];
        while i < order.len() && scores[order[i]] == thr {
            if labels[order[i]] {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        points.push(RocPoint {
            threshold: thr,
            fpr: fp as f64 / neg as f64,
            tpr: tp as f64 / pos as f64,
        });
    }
    Ok(points)
}

pub fn compute_metrics(scores: &[f64], labels: &[bool], threshold: f64) -> Result<Metrics> {
    let (pos, neg) = check(scores, labels)?;
    let mut tp = 0;
    let mut tn = 0;
    for (&s, &y) in scores.iter().zip(labels) {
        let predicted = s >= threshold;
        if y && predicted {
            tp += 1;
        } else if !y && !predicted {
            tn += 1;
        }
    }
    Ok(Metrics {
        auc: auc(scores, labels)?,
        sensitivity: tp as f64 / pos as f64,
        specificity: tn as f64 / neg as f64,
        roc: roc_curve(scores, labels)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_ranking() {
        let m = compute_metrics(&[0.9, 0.8, 0.2, 0.1], &[true, true, false, false], 0.5).unwrap();
        assert_eq!((m.auc, m.sensitivity, m.specificity), (1.0, 1.0, 1.0));
        assert_eq!(m.roc.first().map(|p| (p.fpr, p.tpr)), Some((0.0, 0.0)));
        assert_eq!(m.roc.last().map(|p| (p.fpr, p.tpr)), Some((1.0, 1.0)));
        assert!(m.roc.iter().any(|p| p.fpr == 0.0 && p.tpr == 1.0));
    }

    #[test]
    fn all_ties_give_one_half() {
        assert_eq!(auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
    }

    #[test]
    fn reversed_ranking() {
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &[true, true, false, false]).unwrap(), 0.0);
    }

    #[test]
    fn single_class_is_an_error() {
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(Error::Metric(_))));
        assert!(matches!(compute_metrics(&[0.1], &[false], 0.5), Err(Error::Metric(_))));
    }

    #[test]
    fn cut_is_inclusive() {
        let m = compute_metrics(&[0.5, 0.49], &[true, false], 0.5).unwrap();
        assert_eq!((m.sensitivity, m.specificity), (1.0, 1.0));
    }
}
