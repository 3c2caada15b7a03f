use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::EpochSet;
use crate::error::{Error, Result};
use crate::seed;

/// One spelled character of one subject: the `repetitions` consecutive
/// presentation sequences that are averaged before decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct TrialKey {
    pub subject: u16,
    pub trial: u32,
}

impl TrialKey {
    pub fn of(epochs: &EpochSet, i: usize, repetitions: usize) -> TrialKey {
        TrialKey {
            subject: epochs.subject_ids[i],
            trial: epochs.trial_ids[i] / repetitions as u32,
        }
    }
}

/// Distinct trial keys of a set, sorted.
pub fn trial_keys(epochs: &EpochSet, repetitions: usize) -> Vec<TrialKey> {
    let keys: BTreeSet<TrialKey> = (0..epochs.len())
        .map(|i| TrialKey::of(epochs, i, repetitions))
        .collect();
    keys.into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldAssignment {
    pub k: usize,
    pub repetitions: usize,
    pub fold_of_trial: BTreeMap<TrialKey, usize>,
}

impl FoldAssignment {
    pub fn fold_of_epoch(&self, epochs: &EpochSet, i: usize) -> Option<usize> {
        self.fold_of_trial
            .get(&TrialKey::of(epochs, i, self.repetitions))
            .copied()
    }

    /// `(train, test)` epoch indices for `fold`.
    pub fn split(&self, epochs: &EpochSet, fold: usize) -> (Vec<usize>, Vec<usize>) {
        (0..epochs.len())
            .filter(|&i| self.fold_of_epoch(epochs, i).is_some())
            .partition(|&i| self.fold_of_epoch(epochs, i) != Some(fold))
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        self.fold_of_trial.values().for_each(|&f| sizes[f] += 1);
        sizes
    }
}

fn shuffled_keys(epochs: &EpochSet, repetitions: usize, seed: u64) -> Result<Vec<TrialKey>> {
    if repetitions == 0 {
        return Err(Error::Config("repetitions must be positive".into()));
    }
    let mut keys = trial_keys(epochs, repetitions);
    keys.shuffle(&mut seed::rng(seed));
    Ok(keys)
}

/// Shuffles trials by `seed` and deals them round-robin into `k` folds.
pub fn split_folds(epochs: &EpochSet, k: usize, repetitions: usize, seed: u64) -> Result<FoldAssignment> {
    let keys = shuffled_keys(epochs, repetitions, seed)?;
    if k < 2 || k > keys.len() {
        return Err(Error::Config(format!(
            "k = {k} folds needs 2 ≤ k ≤ {} trials",
            keys.len()
        )));
    }
    let fold_of_trial = keys.into_iter().enumerate().map(|(i, t)| (t, i % k)).collect();
    Ok(FoldAssignment {
        k,
        repetitions,
        fold_of_trial,
    })
}

/// Trial-level `(first, rest)` split with `fraction` of the trials (rounded,
/// at least one on each side) in `first`.
pub fn split_fraction(
    epochs: &EpochSet,
    fraction: f64,
    repetitions: usize,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("fraction {fraction} must be in (0, 1)")));
    }
    let keys = shuffled_keys(epochs, repetitions, seed)?;
    if keys.len() < 2 {
        return Err(Error::InvalidData("need at least two trials to split".into()));
    }
    let n_first = ((keys.len() as f64 * fraction).round() as usize).clamp(1, keys.len() - 1);
    let first: BTreeSet<TrialKey> = keys[..n_first].iter().copied().collect();
    Ok((0..epochs.len()).partition(|&i| first.contains(&TrialKey::of(epochs, i, repetitions))))
}
