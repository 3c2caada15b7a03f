//! Epoch data: synthetic recordings, windowing, decimation, fold splits and
//! the binary epoch container.

mod container;
mod epochs;
mod folds;
mod synthetic;

use ndarray::{Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

pub use container::{load_epochs, load_epochs_csv, read_epochs, save_epochs, write_epochs, MAGIC, VERSION};
pub use epochs::{downsample, extract_epochs, extract_downsampled, samples_for_ms, JITTER_LEVELS_MS, WINDOW_MS};
pub use folds::{split_folds, split_fraction, trial_keys, FoldAssignment, TrialKey};
pub use synthetic::{generate_synthetic, generate_subject, NoiseConfig, P300Config, SubjectVariation, SyntheticConfig};

use crate::error::{Error, Result};

/// One stimulus presentation in a continuous recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub onset_sample: usize,
    /// 0-based symbol index.
    pub char_id: u16,
    /// One presentation sequence of the whole alphabet.
    pub trial_id: u32,
    pub is_target: bool,
}

/// Continuous `[channels × samples]` signal with its stimulus markers.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecording {
    pub signal: ndarray::Array2<f64>,
    pub sampling_rate: f64,
    pub events: Vec<Event>,
    pub subject_id: String,
    pub subject_index: u16,
}

/// Labeled fixed-length epochs `[epochs × channels × samples]` with metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub data: Array3<f64>,
    /// 1 = target.
    pub labels: Vec<u8>,
    pub char_ids: Vec<u16>,
    pub trial_ids: Vec<u32>,
    pub subject_ids: Vec<u16>,
    /// Stimulus onset in the source recording (before any jitter).
    pub onsets: Vec<i64>,
    pub sampling_rate: f64,
}

impl EpochSet {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_channels(&self) -> usize {
        self.data.dim().1
    }

    pub fn n_samples(&self) -> usize {
        self.data.dim().2
    }

    pub fn n_features(&self) -> usize {
        self.n_channels() * self.n_samples()
    }

    /// Epochs flattened channel-major: `[epochs, channels * samples]`.
    pub fn features(&self) -> ArrayView2<'_, f64> {
        let (n, c, s) = self.data.dim();
        if self.data.is_standard_layout() {
            self.data
                .view()
                .into_shape_with_order((n, c * s))
                .expect("standard layout")
        } else {
            panic!("epoch tensor must be in standard layout")
        }
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.labels.iter().map(|&l| f64::from(l)).collect()
    }

    pub fn target_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.labels.iter().filter(|&&l| l == 1).count() as f64 / self.len() as f64
    }

    pub fn subset(&self, indices: &[usize]) -> EpochSet {
        EpochSet {
            data: self.data.select(Axis(0), indices),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            char_ids: indices.iter().map(|&i| self.char_ids[i]).collect(),
            trial_ids: indices.iter().map(|&i| self.trial_ids[i]).collect(),
            subject_ids: indices.iter().map(|&i| self.subject_ids[i]).collect(),
            onsets: indices.iter().map(|&i| self.onsets[i]).collect(),
            sampling_rate: self.sampling_rate,
        }
    }

    /// Concatenates sets that share channel count, length and rate.
    pub fn concat(sets: &[&EpochSet]) -> Result<EpochSet> {
        let first = sets.first().ok_or(Error::Empty("epoch sets"))?;
        for s in sets {
            if s.n_channels() != first.n_channels()
                || s.n_samples() != first.n_samples()
                || s.sampling_rate != first.sampling_rate
            {
                return Err(Error::InvalidData(
                    "cannot concatenate epoch sets with different shapes or rates".into(),
                ));
            }
        }
        let views: Vec<_> = sets.iter().map(|s| s.data.view()).collect();
        let data = ndarray::concatenate(Axis(0), &views)
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        let cat = |f: &dyn Fn(&EpochSet) -> usize| sets.iter().map(|s| f(s)).sum::<usize>();
        let n = cat(&|s| s.len());
        let mut out = EpochSet {
            data,
            labels: Vec::with_capacity(n),
            char_ids: Vec::with_capacity(n),
            trial_ids: Vec::with_capacity(n),
            subject_ids: Vec::with_capacity(n),
            onsets: Vec::with_capacity(n),
            sampling_rate: first.sampling_rate,
        };
        for s in sets {
            out.labels.extend_from_slice(&s.labels);
            out.char_ids.extend_from_slice(&s.char_ids);
            out.trial_ids.extend_from_slice(&s.trial_ids);
            out.subject_ids.extend_from_slice(&s.subject_ids);
            out.onsets.extend_from_slice(&s.onsets);
        }
        Ok(out)
    }

    /// Rounds every amplitude to the nearest `f32`, the precision of the
    /// on-disk container.
    pub fn quantize_f32(&mut self) {
        self.data.mapv_inplace(|v| f64::from(v as f32));
    }

    /// Checks binary labels, consistent metadata lengths and exactly one
    /// target per (subject, trial).
    pub fn validate(&self) -> Result<()> {
        let n = self.data.dim().0;
        if [
            self.labels.len(),
            self.char_ids.len(),
            self.trial_ids.len(),
            self.subject_ids.len(),
            self.onsets.len(),
        ]
        .iter()
        .any(|&l| l != n)
        {
            return Err(Error::InvalidData(
                "metadata lengths differ from the number of epochs".into(),
            ));
        }
        if let Some(l) = self.labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidData(format!("label {l} is not binary")));
        }
        let mut targets = std::collections::BTreeMap::<(u16, u32), usize>::new();
        for i in 0..n {
            *targets
                .entry((self.subject_ids[i], self.trial_ids[i]))
                .or_default() += usize::from(self.labels[i]);
        }
        if let Some(((s, t), c)) = targets.iter().find(|(_, &c)| c != 1) {
            return Err(Error::InvalidData(format!(
                "subject {s} trial {t} has {c} target epochs"
            )));
        }
        Ok(())
    }
}
