use std::ops::Range;

use nalgebra::DMatrix;

use super::{robust_scale, SampleWindow, SubjectRecord};
use crate::error::{Error, Result};

/// Contiguous, non-overlapping ranges covering `0..len` in `windows` equal parts.
pub fn window_ranges(len: usize, windows: usize) -> Result<Vec<Range<usize>>> {
    if windows == 0 || !len.is_multiple_of(windows) || len == 0 {
        return Err(Error::Config(format!(
            "session length {len} is not divisible into {windows} windows"
        )));
    }
    let w = len / windows;
    Ok((0..windows).map(|k| k * w..(k + 1) * w).collect())
}

/// Splits every session into `windows_per_scan` windows, transposes each to
/// `N × T` and robust-scales every node row within its window.
pub fn window_split(record: &SubjectRecord, windows_per_scan: usize) -> Result<Vec<SampleWindow>> {
    let n_nodes = record
        .n_nodes()
        .ok_or_else(|| Error::Contract(format!("subject {} has no sessions", record.subject_id)))?;
    let mut out = Vec::with_capacity(record.sessions.len() * windows_per_scan);
    for (scan_index, session) in record.sessions.iter().enumerate() {
        if session.ncols() != n_nodes {
            return Err(Error::Contract(format!(
                "subject {} session {scan_index} has {} nodes, expected {n_nodes}",
                record.subject_id,
                session.ncols()
            )));
        }
        for (window_index, range) in window_ranges(session.nrows(), windows_per_scan)?
            .into_iter()
            .enumerate()
        {
            let len = range.len();
            let mut features = DMatrix::zeros(n_nodes, len);
            for node in 0..n_nodes {
                let raw: Vec<f64> = range.clone().map(|t| session[(t, node)]).collect();
                for (t, v) in robust_scale(&raw)?.into_iter().enumerate() {
                    features[(node, t)] = v;
                }
            }
            out.push(SampleWindow {
                subject_id: record.subject_id.clone(),
                scan_index,
                window_index,
                label: record.label,
                features,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::Label;

    fn record(sessions: usize, len: usize, nodes: usize) -> SubjectRecord {
        SubjectRecord {
            subject_id: "s".into(),
            label: Label::Positive,
            sessions: (0..sessions)
                .map(|s| DMatrix::from_fn(len, nodes, |t, n| (s * 1000 + t * 7 + n * 3) as f64 % 11.0))
                .collect(),
        }
    }

    #[test]
    fn four_full_sessions() {
        let w = window_split(&record(4, 1200, 3), 1).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|s| s.features.shape() == (3, 1200)));
    }

    #[test]
    fn sixty_four_short_windows() {
        let w = window_split(&record(4, 1200, 3), 16).unwrap();
        assert_eq!(w.len(), 64);
        assert!(w.iter().all(|s| s.features.shape() == (3, 75)));
        assert_eq!((w[17].scan_index, w[17].window_index), (1, 1));
    }

    #[test]
    fn ranges_partition_the_session() {
        assert_eq!(window_ranges(8, 2).unwrap(), vec![0..4, 4..8]);
        for (len, k) in [(1200, 16), (160, 4), (75, 1), (30, 5)] {
            let r = window_ranges(len, k).unwrap();
            let covered: Vec<usize> = r.into_iter().flatten().collect();
            assert_eq!(covered, (0..len).collect::<Vec<_>>());
        }
    }

    #[test]
    fn indivisible_length_is_a_config_error() {
        assert!(matches!(window_ranges(10, 3), Err(Error::Config(_))));
        assert!(window_split(&record(1, 10, 2), 3).is_err());
    }
}
