use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::derive_seed;
use crate::error::{Error, Result};
use crate::prep::{GraphSample, Label};

/// Fraction of a training fold's subjects held out for validation.
pub const VALIDATION_FRACTION: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InnerRole {
    Train,
    Validation,
}

/// Subject-level assignment to outer folds, plus each fold's inner split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub folds: BTreeMap<String, usize>,
    /// Indexed by outer fold; covers exactly the subjects outside that fold.
    pub inner: Vec<BTreeMap<String, InnerRole>>,
}

/// One label per subject, sorted by subject id.
pub fn subject_labels(samples: &[GraphSample]) -> Result<BTreeMap<String, Label>> {
    let mut out = BTreeMap::new();
    for s in samples {
        if let Some(prev) = out.insert(s.window.subject_id.clone(), s.label()) {
            if prev != s.label() {
                return Err(Error::Contract(format!(
                    "subject {} carries both labels",
                    s.window.subject_id
                )));
            }
        }
    }
    Ok(out)
}

/// Deals a shuffled list round-robin starting at `offset`; returns the next offset.
fn deal(ids: &[String], k: usize, offset: usize, out: &mut BTreeMap<String, usize>) -> usize {
    for (i, id) in ids.iter().enumerate() {
        out.insert(id.clone(), (offset + i) % k);
    }
    (offset + ids.len()) % k
}

fn by_class<'a>(subjects: impl Iterator<Item = (&'a String, &'a Label)>) -> [Vec<String>; 2] {
    let mut classes: [Vec<String>; 2] = [Vec::new(), Vec::new()];
    for (id, &label) in subjects {
        classes[label as usize].push(id.clone());
    }
    classes
}

/// Stratified, subject-grouped `k`-fold plan. Each class is shuffled and dealt
/// round-robin, continuing where the previous class stopped so fold sizes stay
/// within one of each other. The inner split holds out `round(n_c / 5)`
/// subjects per class (at least one) from every training fold.
pub fn plan_folds(subjects: &BTreeMap<String, Label>, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {k}")));
    }
    let classes = by_class(subjects.iter());
    for (c, ids) in classes.iter().enumerate() {
        if ids.len() < k {
            return Err(Error::Config(format!(
                "{k} folds requested but class {c} has only {} subjects",
                ids.len()
            )));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = BTreeMap::new();
    let mut offset = 0;
    for ids in &classes {
        let mut ids = ids.clone();
        ids.shuffle(&mut rng);
        offset = deal(&ids, k, offset, &mut folds);
    }

    let mut inner = Vec::with_capacity(k);
    for f in 0..k {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, f as u64, u64::MAX));
        let rest = subjects.iter().filter(|(id, _)| folds[*id] != f);
        let mut roles = BTreeMap::new();
        for ids in by_class(rest) {
            let mut ids = ids;
            ids.shuffle(&mut rng);
            let n_val = ((ids.len() as f64 * VALIDATION_FRACTION).round() as usize).max(1);
            if n_val >= ids.len() {
                return Err(Error::Config(format!(
                    "fold {f}: a class has {} training subjects, too few for a validation split",
                    ids.len()
                )));
            }
            for (i, id) in ids.into_iter().enumerate() {
                roles.insert(id, if i < n_val { InnerRole::Validation } else { InnerRole::Train });
            }
        }
        inner.push(roles);
    }
    let plan = FoldPlan { k, folds, inner };
    plan.check_disjoint()?;
    Ok(plan)
}

impl FoldPlan {
    pub fn test_subjects(&self, fold: usize) -> BTreeSet<&str> {
        self.folds.iter().filter(|(_, &f)| f == fold).map(|(id, _)| id.as_str()).collect()
    }

    pub fn inner_subjects(&self, fold: usize, role: InnerRole) -> BTreeSet<&str> {
        self.inner[fold].iter().filter(|(_, &r)| r == role).map(|(id, _)| id.as_str()).collect()
    }

    /// Leakage guard: test, inner-train and validation subjects of every fold
    /// are pairwise disjoint and together cover all subjects.
    pub fn check_disjoint(&self) -> Result<()> {
        if self.inner.len() != self.k {
            return Err(Error::Harness(format!("{} inner splits for {} folds", self.inner.len(), self.k)));
        }
        for f in 0..self.k {
            let test = self.test_subjects(f);
            let train = self.inner_subjects(f, InnerRole::Train);
            let val = self.inner_subjects(f, InnerRole::Validation);
            let leaks = test.intersection(&train).chain(test.intersection(&val)).chain(train.intersection(&val)).next();
            if let Some(id) = leaks {
                return Err(Error::Harness(format!("subject {id} leaks across splits of fold {f}")));
            }
            if test.len() + train.len() + val.len() != self.folds.len() {
                return Err(Error::Harness(format!("fold {f} does not cover every subject")));
            }
        }
        Ok(())
    }
}
