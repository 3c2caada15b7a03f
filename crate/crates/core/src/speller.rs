//! Character decoding from per-epoch scores.

use std::collections::BTreeMap;

use ndarray::Array2;

use crate::data::{EpochSet, TrialKey};
use crate::error::{Error, Result};

/// Scores of one spelled character: `[repetitions × characters]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialScores {
    pub key: TrialKey,
    pub scores: Array2<f64>,
    pub true_char: usize,
}

fn argmax(values: impl Iterator<Item = f64>) -> Result<usize> {
    let mut best: Option<(usize, f64)> = None;
    let mut n = 0;
    for (i, v) in values.enumerate() {
        if v.is_nan() {
            return Err(Error::NonFinite(format!("score of character {i} is NaN")));
        }
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((i, v));
        }
        n += 1;
    }
    if n < 2 {
        return Err(Error::InvalidData(format!("need at least 2 characters, got {n}")));
    }
    Ok(best.expect("non-empty").0)
}

/// Character with the highest score; ties go to the lowest index.
pub fn decode_single_trial(scores: &[f64]) -> Result<usize> {
    argmax(scores.iter().copied())
}

/// Argmax of the per-character mean over repetitions.
pub fn decode_repetitions(trial: &TrialScores) -> Result<usize> {
    let r = trial.scores.nrows();
    if r == 0 {
        return Err(Error::Empty("repetitions"));
    }
    argmax(
        trial
            .scores
            .columns()
            .into_iter()
            .map(|c| c.iter().sum::<f64>() / r as f64),
    )
}

pub fn speller_accuracy(trials: &[TrialScores]) -> Result<f64> {
    if trials.is_empty() {
        return Err(Error::Empty("trials"));
    }
    let mut correct = 0;
    for t in trials {
        if decode_repetitions(t)? == t.true_char {
            correct += 1;
        }
    }
    Ok(correct as f64 / trials.len() as f64)
}

/// Groups per-epoch scores into complete `[R × C]` trials.
///
/// Row = `trial_id % R`, column = `char_id`. Trials with a missing or duplicated
/// cell, or without exactly one target character, are returned in the second
/// list instead.
pub fn assemble_trials(
    epochs: &EpochSet,
    scores: &[f64],
    repetitions: usize,
    n_chars: usize,
) -> Result<(Vec<TrialScores>, Vec<TrialKey>)> {
    if scores.len() != epochs.len() {
        return Err(Error::InvalidData(format!(
            "{} scores for {} epochs",
            scores.len(),
            epochs.len()
        )));
    }
    if repetitions == 0 || n_chars < 2 {
        return Err(Error::Config("need R ≥ 1 and at least 2 characters".into()));
    }
    struct Partial {
        cells: Array2<f64>,
        filled: Array2<bool>,
        targets: Vec<usize>,
        broken: bool,
    }
    let mut groups: BTreeMap<TrialKey, Partial> = BTreeMap::new();
    for i in 0..epochs.len() {
        let key = TrialKey::of(epochs, i, repetitions);
        let g = groups.entry(key).or_insert_with(|| Partial {
            cells: Array2::zeros((repetitions, n_chars)),
            filled: Array2::from_elem((repetitions, n_chars), false),
            targets: Vec::new(),
            broken: false,
        });
        let r = epochs.trial_ids[i] as usize % repetitions;
        let c = usize::from(epochs.char_ids[i]);
        if c >= n_chars || g.filled[[r, c]] {
            g.broken = true;
            continue;
        }
        g.cells[[r, c]] = scores[i];
        g.filled[[r, c]] = true;
        if epochs.labels[i] == 1 && !g.targets.contains(&c) {
            g.targets.push(c);
        }
    }
    let mut complete = Vec::new();
    let mut rejected = Vec::new();
    for (key, g) in groups {
        if g.broken || g.targets.len() != 1 || g.filled.iter().any(|&f| !f) {
            rejected.push(key);
        } else {
            complete.push(TrialScores {
                key,
                scores: g.cells,
                true_char: g.targets[0],
            });
        }
    }
    Ok((complete, rejected))
}
