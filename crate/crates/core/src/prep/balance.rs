use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Label, SubjectRecord};
use crate::error::{Error, Result};

/// Drops randomly chosen whole subjects of the larger class until both classes
/// have the same number of subjects. Input order is preserved.
pub fn balance_by_subject(records: Vec<SubjectRecord>, seed: u64) -> Result<Vec<SubjectRecord>> {
    let pos: Vec<usize> = (0..records.len()).filter(|&i| records[i].label == Label::Positive).collect();
    let neg: Vec<usize> = (0..records.len()).filter(|&i| records[i].label == Label::Negative).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::Contract(format!(
            "balancing needs both classes, got {} positive and {} negative subjects",
            pos.len(),
            neg.len()
        )));
    }
    if pos.len() == neg.len() {
        return Ok(records);
    }
    let (mut larger, target) = if pos.len() > neg.len() {
        (pos, neg.len())
    } else {
        (neg, pos.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    larger.shuffle(&mut rng);
    let mut drop = vec![false; records.len()];
    for &i in &larger[target..] {
        drop[i] = true;
    }
    Ok(records
        .into_iter()
        .zip(drop)
        .filter_map(|(r, d)| (!d).then_some(r))
        .collect())
}
