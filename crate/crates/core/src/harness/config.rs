use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{samples_for_ms, SyntheticConfig, JITTER_LEVELS_MS};
use crate::error::{Error, Result};
use crate::models::{ModelDims, ModelKind};
use crate::nn::{RmsProp, TrainSchedule};

/// Where epochs come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSource {
    /// Generated, windowed and decimated in memory.
    Synthetic(SyntheticConfig),
    /// Preprocessed epoch containers (one or more subjects per file).
    Containers { paths: Vec<PathBuf> },
}

/// Cross-validation scope of `train`/`eval`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    WithinSubject,
    Pooled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// `(epochs, learning_rate)` phases run in order.
    pub phases: Vec<(usize, f64)>,
    pub batch_size: usize,
    pub rho: f64,
    pub eps: f64,
    /// Weight of target epochs in the loss; 1.0 = unweighted.
    pub pos_weight: f64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self::from_phases(&[(30, 1e-3), (30, 1e-5)])
    }
}

impl TrainingConfig {
    pub fn from_phases(phases: &[(usize, f64)]) -> Self {
        let r = RmsProp::default();
        Self {
            phases: phases.to_vec(),
            batch_size: 64,
            rho: r.rho,
            eps: r.eps,
            pos_weight: 1.0,
        }
    }

    pub fn fine_tune_default() -> Self {
        Self::from_phases(&[(30, 1e-4)])
    }

    pub fn schedule(&self, shuffle_seed: u64) -> TrainSchedule {
        let mut s = TrainSchedule::new(&self.phases, shuffle_seed);
        s.batch_size = self.batch_size;
        s.rmsprop = RmsProp {
            rho: self.rho,
            eps: self.eps,
        };
        s.pos_weight = self.pos_weight;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub models: Vec<ModelKind>,
    pub data: DataSource,
    pub scope: Scope,
    pub folds: usize,
    pub repetitions: usize,
    pub n_chars: usize,
    /// Decimation factor applied after windowing synthetic recordings.
    pub downsample: usize,
    /// Onset shifts of the noise sweep; 0 is always added as the baseline.
    pub noise_levels_ms: Vec<i64>,
    pub seed: u64,
    pub fine_tune: bool,
    /// Share of the held-out subject's trials used for calibration.
    pub calibration_fraction: f64,
    /// Z-score every feature with training-set statistics.
    pub standardize: bool,
    pub training: TrainingConfig,
    pub fine_tune_training: TrainingConfig,
    pub dims: ModelDims,
    /// Models analyzed by the saliency experiment (networks only).
    pub saliency_models: Vec<ModelKind>,
    pub saliency_svg: bool,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            models: ModelKind::ALL.to_vec(),
            data: DataSource::Synthetic(SyntheticConfig::default()),
            scope: Scope::WithinSubject,
            folds: 10,
            repetitions: 10,
            n_chars: 30,
            downsample: 8,
            noise_levels_ms: JITTER_LEVELS_MS.to_vec(),
            seed: 0,
            fine_tune: true,
            calibration_fraction: 0.75,
            standardize: false,
            training: TrainingConfig::default(),
            fine_tune_training: TrainingConfig::fine_tune_default(),
            dims: ModelDims::default(),
            saliency_models: vec![ModelKind::Cnn, ModelKind::LstmCnnSmall],
            saliency_svg: true,
            jobs: 1,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.models.is_empty() {
            return fail("no models selected".into());
        }
        if self.repetitions == 0 || self.n_chars < 2 || self.downsample == 0 {
            return fail("repetitions and downsample must be positive, n_chars ≥ 2".into());
        }
        if self.folds < 2 {
            return fail(format!("folds = {} must be at least 2", self.folds));
        }
        if !(self.calibration_fraction > 0.0 && self.calibration_fraction < 1.0) {
            return fail(format!(
                "calibration_fraction = {} must be in (0, 1)",
                self.calibration_fraction
            ));
        }
        if self.jobs == 0 {
            return fail("jobs must be at least 1".into());
        }
        if let Some(k) = self.saliency_models.iter().find(|k| !k.is_network()) {
            return fail(format!("saliency is defined for networks only, not {k}"));
        }
        self.training.schedule(0).validate()?;
        self.fine_tune_training.schedule(0).validate()?;
        if let DataSource::Synthetic(s) = &self.data {
            s.validate()?;
            if s.n_chars != self.n_chars || s.n_repetitions != self.repetitions {
                return fail(format!(
                    "synthetic data has {} chars × {} repetitions, experiment expects {} × {}",
                    s.n_chars, s.n_repetitions, self.n_chars, self.repetitions
                ));
            }
            for &level in &self.noise_levels_ms {
                samples_for_ms(level, s.sampling_rate)?;
                if level.abs() > s.jitter_margin_ms {
                    return fail(format!(
                        "noise level {level} ms exceeds jitter_margin_ms {}",
                        s.jitter_margin_ms
                    ));
                }
            }
        }
        Ok(())
    }

    /// Baseline followed by the configured levels, without duplicates.
    pub fn sweep_levels(&self) -> Vec<i64> {
        let mut levels = vec![0];
        for &l in &self.noise_levels_ms {
            if !levels.contains(&l) {
                levels.push(l);
            }
        }
        levels
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid_and_round_trips() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.sweep_levels(), vec![0, -120, -80, -40, 40, 80, 120]);
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<ExperimentConfig>(r#"{"fold": 3}"#);
        assert!(err.is_err());
        let ok: ExperimentConfig = serde_json::from_str(r#"{"folds": 3}"#).unwrap();
        assert_eq!(ok.folds, 3);
    }

    #[test]
    fn fractional_noise_level_rejected() {
        let cfg = ExperimentConfig {
            noise_levels_ms: vec![42],
            ..ExperimentConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ExperimentConfig {
            calibration_fraction: 1.0,
            ..ExperimentConfig::default()
        };
        assert!(cfg.validate().is_err());
    }
}
