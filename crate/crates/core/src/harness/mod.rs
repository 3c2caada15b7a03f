//! The experiments: within-subject and pooled cross-validation,
//! leave-one-subject-out transfer with fine-tuning, the temporal-noise sweep
//! and saliency maps.

mod config;
mod report;
mod saliency;
mod stats;

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use ndarray::{Array1, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{DataSource, ExperimentConfig, Scope, TrainingConfig};
pub use report::{
    ExperimentReport, FoldResult, ModelInfo, NoiseRow, SaliencyResult, SummaryRow, TTestRow,
    TransferRow, SCHEMA_VERSION,
};
pub use saliency::{column_times_ms, mass_fraction, saliency_csv, saliency_map, saliency_svg, uniform_share};
pub use stats::{auc, welch_t_test, TTest};

use crate::data::{
    extract_downsampled, generate_synthetic, load_epochs, split_folds, split_fraction, trial_keys,
    EpochSet, RawRecording, TrialKey, WINDOW_MS,
};
use crate::error::{Error, Result};
use crate::models::{ModelKind, Scorer};
use crate::nn::TrainingLog;
use crate::seed;
use crate::speller::{assemble_trials, speller_accuracy};

/// Per-feature z-scoring fitted on a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(epochs: &EpochSet) -> Result<Standardizer> {
        let x = epochs.features();
        let mean = x.mean_axis(Axis(0)).ok_or(Error::Empty("standardization set"))?;
        let std = x.std_axis(Axis(0), 0.0).mapv(|s| if s > 1e-12 { s } else { 1.0 });
        Ok(Standardizer {
            mean: mean.to_vec(),
            std: std.to_vec(),
        })
    }

    pub fn apply(&self, epochs: &EpochSet) -> EpochSet {
        let mean = Array1::from(self.mean.clone());
        let std = Array1::from(self.std.clone());
        let mut out = epochs.clone();
        let (n, c, s) = out.data.dim();
        let mut flat = out
            .data
            .view_mut()
            .into_shape_with_order((n, c * s))
            .expect("standard layout");
        for mut row in flat.outer_iter_mut() {
            row -= &mean;
            row /= &std;
        }
        out
    }
}

/// Preprocessed epochs per subject, plus the raw recordings when a noise
/// sweep needs to re-extract shifted windows.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub subjects: Vec<EpochSet>,
    pub recordings: Option<Vec<RawRecording>>,
}

pub fn subject_label(index: u16) -> String {
    format!("subject{:02}", index + 1)
}

fn preprocess(rec: &RawRecording, jitter_ms: i64, factor: usize) -> Result<EpochSet> {
    let mut e = extract_downsampled(rec, WINDOW_MS, jitter_ms, factor)?;
    e.quantize_f32();
    Ok(e)
}

/// Builds the dataset inside the current thread pool.
pub fn load_dataset(cfg: &ExperimentConfig, keep_recordings: bool) -> Result<Dataset> {
    let ds = match &cfg.data {
        DataSource::Synthetic(s) => {
            let recs = generate_synthetic(s)?;
            let subjects = recs
                .par_iter()
                .map(|r| preprocess(r, 0, cfg.downsample))
                .collect::<Result<Vec<_>>>()?;
            Dataset {
                subjects,
                recordings: keep_recordings.then_some(recs),
            }
        }
        DataSource::Containers { paths } => {
            if keep_recordings {
                return Err(Error::Config(
                    "the noise sweep re-extracts shifted windows and needs a synthetic source".into(),
                ));
            }
            if paths.is_empty() {
                return Err(Error::Config("no container paths given".into()));
            }
            let sets = paths.iter().map(|p| load_epochs(p)).collect::<Result<Vec<_>>>()?;
            let all = EpochSet::concat(&sets.iter().collect::<Vec<_>>())?;
            let ids: BTreeSet<u16> = all.subject_ids.iter().copied().collect();
            let subjects = ids
                .into_iter()
                .map(|s| {
                    let idx: Vec<usize> = (0..all.len()).filter(|&i| all.subject_ids[i] == s).collect();
                    all.subset(&idx)
                })
                .collect();
            Dataset {
                subjects,
                recordings: None,
            }
        }
    };
    for s in &ds.subjects {
        if s.n_channels() != cfg.dims.channels || s.n_samples() != cfg.dims.samples {
            return Err(Error::Config(format!(
                "epochs are {} channels × {} samples, models expect {} × {}",
                s.n_channels(),
                s.n_samples(),
                cfg.dims.channels,
                cfg.dims.samples
            )));
        }
        s.validate()?;
    }
    Ok(ds)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(e.to_string()))
}

/// A trained scorer with what is needed to replay its evaluation.
pub struct Trained {
    pub scorer: Scorer,
    pub log: TrainingLog,
    pub standardizer: Option<Standardizer>,
}

impl Trained {
    fn prepare(&self, epochs: &EpochSet) -> EpochSet {
        match &self.standardizer {
            Some(s) => s.apply(epochs),
            None => epochs.clone(),
        }
    }

    pub fn scores(&self, epochs: &EpochSet) -> Result<Vec<f64>> {
        self.scorer.score_epochs(&self.prepare(epochs))
    }
}

fn train_unit(cfg: &ExperimentConfig, model: ModelKind, train: &EpochSet, tag: &str) -> Result<Trained> {
    let standardizer = if cfg.standardize {
        Some(Standardizer::fit(train)?)
    } else {
        None
    };
    let data = match &standardizer {
        Some(s) => s.apply(train),
        None => train.clone(),
    };
    let mut scorer = Scorer::build(model, &cfg.dims, seed::derive(cfg.seed, &format!("{tag}/init")))?;
    let schedule = cfg.training.schedule(seed::derive(cfg.seed, &format!("{tag}/shuffle")));
    let log = scorer.train(&data, &schedule)?;
    Ok(Trained {
        scorer,
        log,
        standardizer,
    })
}

/// Speller accuracy of `trained` on `epochs`; also the number of complete
/// trials and a warning when incomplete ones were dropped.
pub fn decode_accuracy(
    cfg: &ExperimentConfig,
    trained: &Trained,
    epochs: &EpochSet,
) -> Result<(f64, usize, Option<String>)> {
    let scores = trained.scores(epochs)?;
    let (trials, rejected) = assemble_trials(epochs, &scores, cfg.repetitions, cfg.n_chars)?;
    let warning = (!rejected.is_empty()).then(|| format!("{} incomplete trial(s) dropped", rejected.len()));
    Ok((speller_accuracy(&trials)?, trials.len(), warning))
}

/// What must be saved to replay one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub file: String,
    pub model: ModelKind,
    pub subject: String,
    pub fold: usize,
    pub test_trials: Vec<TrialKey>,
    pub standardizer: Option<Standardizer>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub scope: Scope,
    pub entries: Vec<CheckpointEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn model_infos(cfg: &ExperimentConfig) -> Result<Vec<ModelInfo>> {
    cfg.models
        .iter()
        .map(|&m| {
            Ok(ModelInfo {
                model: m,
                param_count: Scorer::build(m, &cfg.dims, 0)?.param_count(),
                published_param_count: m.published_param_count(),
            })
        })
        .collect()
}

/// (label, epochs) evaluation groups of a cross-validation scope.
fn cv_groups(ds: &Dataset, scope: Scope) -> Result<Vec<(String, EpochSet)>> {
    Ok(match scope {
        Scope::WithinSubject => ds
            .subjects
            .iter()
            .map(|s| (subject_label(s.subject_ids[0]), s.clone()))
            .collect(),
        Scope::Pooled => vec![(
            "all".to_string(),
            EpochSet::concat(&ds.subjects.iter().collect::<Vec<_>>())?,
        )],
    })
}

fn scope_name(scope: Scope) -> &'static str {
    match scope {
        Scope::WithinSubject => "within_subject",
        Scope::Pooled => "pooled",
    }
}

struct CvUnit<'a> {
    model: ModelKind,
    label: &'a str,
    fold: usize,
    train: Vec<usize>,
    test: Vec<usize>,
    epochs: &'a EpochSet,
}

fn cv_tag(scope: Scope, model: ModelKind, label: &str, fold: usize) -> String {
    format!("cv/{}/{}/{label}/{fold}", scope_name(scope), model.name())
}

/// Builds the (model, group, fold) units; groups with too few trials are
/// reported as warnings.
fn cv_units<'a>(
    cfg: &ExperimentConfig,
    scope: Scope,
    groups: &'a [(String, EpochSet)],
    warnings: &mut Vec<String>,
) -> Result<Vec<CvUnit<'a>>> {
    let mut units = Vec::new();
    for (label, epochs) in groups {
        let n_trials = trial_keys(epochs, cfg.repetitions).len();
        if n_trials < cfg.folds {
            warnings.push(format!(
                "{label}: {n_trials} trials are fewer than {} folds, skipped",
                cfg.folds
            ));
            continue;
        }
        let folds = split_folds(
            epochs,
            cfg.folds,
            cfg.repetitions,
            seed::derive(cfg.seed, &format!("folds/{}/{label}", scope_name(scope))),
        )?;
        for fold in 0..cfg.folds {
            let (train, test) = folds.split(epochs, fold);
            for &model in &cfg.models {
                units.push(CvUnit {
                    model,
                    label,
                    fold,
                    train: train.clone(),
                    test: test.clone(),
                    epochs,
                });
            }
        }
    }
    if units.is_empty() {
        return Err(Error::InvalidData("no subject has enough trials for cross-validation".into()));
    }
    Ok(units)
}

/// k-fold cross-validation within each subject or over the pooled subjects.
/// When `checkpoints` is given every trained scorer is saved there with a
/// replay manifest.
pub fn run_cv(cfg: &ExperimentConfig, scope: Scope, checkpoints: Option<&Path>) -> Result<ExperimentReport> {
    cfg.validate()?;
    pool(cfg.jobs)?.install(|| {
        let ds = load_dataset(cfg, false)?;
        let mut report = ExperimentReport::new(scope_name(scope), cfg);
        report.models = model_infos(cfg)?;
        let groups = cv_groups(&ds, scope)?;
        let mut warnings = Vec::new();
        let units = cv_units(cfg, scope, &groups, &mut warnings)?;
        if let Some(dir) = checkpoints {
            fs::create_dir_all(dir)?;
        }
        let outcomes = units
            .par_iter()
            .map(|u| -> Result<(FoldResult, Option<String>, Option<CheckpointEntry>)> {
                let train = u.epochs.subset(&u.train);
                let test = u.epochs.subset(&u.test);
                let trained = train_unit(cfg, u.model, &train, &cv_tag(scope, u.model, u.label, u.fold))?;
                let (accuracy, n_trials, warning) = decode_accuracy(cfg, &trained, &test)?;
                let entry = match checkpoints {
                    Some(dir) => {
                        let file = format!("{}_{}_fold{:02}.bin", u.model.name(), u.label, u.fold);
                        trained.scorer.save(&dir.join(&file))?;
                        Some(CheckpointEntry {
                            file,
                            model: u.model,
                            subject: u.label.to_string(),
                            fold: u.fold,
                            test_trials: trial_keys(&test, cfg.repetitions),
                            standardizer: trained.standardizer.clone(),
                        })
                    }
                    None => None,
                };
                Ok((
                    FoldResult {
                        model: u.model,
                        subject: u.label.to_string(),
                        condition: scope_name(scope).to_string(),
                        fold: u.fold,
                        accuracy,
                        n_trials,
                        epoch_losses: trained.log.epoch_losses,
                    },
                    warning.map(|w| format!("{} {} fold {}: {w}", u.model, u.label, u.fold)),
                    entry,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut entries = Vec::new();
        for (fold, warning, entry) in outcomes {
            report.folds.push(fold);
            warnings.extend(warning);
            entries.extend(entry);
        }
        report.warnings = warnings;
        report.summarize();
        if let Some(dir) = checkpoints {
            let manifest = CheckpointManifest { scope, entries };
            fs::write(dir.join(MANIFEST_FILE), serde_json::to_string_pretty(&manifest)? + "\n")?;
        }
        Ok(report)
    })
}

pub fn run_within_subject(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_cv(cfg, Scope::WithinSubject, None)
}

pub fn run_pooled(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    run_cv(cfg, Scope::Pooled, None)
}

/// Replays saved cross-validation checkpoints on their held-out trials.
pub fn evaluate_checkpoints(cfg: &ExperimentConfig, dir: &Path) -> Result<ExperimentReport> {
    cfg.validate()?;
    let manifest: CheckpointManifest =
        serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST_FILE))?)?;
    pool(cfg.jobs)?.install(|| {
        let ds = load_dataset(cfg, false)?;
        let groups = cv_groups(&ds, manifest.scope)?;
        let mut report = ExperimentReport::new(scope_name(manifest.scope), cfg);
        let mut models: Vec<ModelKind> = Vec::new();
        for e in &manifest.entries {
            if !models.contains(&e.model) {
                models.push(e.model);
            }
        }
        report.models = model_infos(&ExperimentConfig {
            models,
            ..cfg.clone()
        })?;
        let results = manifest
            .entries
            .par_iter()
            .map(|e| -> Result<(FoldResult, Option<String>)> {
                let (_, epochs) = groups
                    .iter()
                    .find(|(l, _)| *l == e.subject)
                    .ok_or_else(|| Error::InvalidData(format!("no data for {}", e.subject)))?;
                let keep: BTreeSet<TrialKey> = e.test_trials.iter().copied().collect();
                let idx: Vec<usize> = (0..epochs.len())
                    .filter(|&i| keep.contains(&TrialKey::of(epochs, i, cfg.repetitions)))
                    .collect();
                let test = epochs.subset(&idx);
                let trained = Trained {
                    scorer: Scorer::load(&dir.join(&e.file), cfg.dims.n_features())?,
                    log: TrainingLog::default(),
                    standardizer: e.standardizer.clone(),
                };
                let (accuracy, n_trials, warning) = decode_accuracy(cfg, &trained, &test)?;
                Ok((
                    FoldResult {
                        model: e.model,
                        subject: e.subject.clone(),
                        condition: scope_name(manifest.scope).to_string(),
                        fold: e.fold,
                        accuracy,
                        n_trials,
                        epoch_losses: Vec::new(),
                    },
                    warning,
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        for (f, w) in results {
            report.folds.push(f);
            report.warnings.extend(w);
        }
        report.summarize();
        Ok(report)
    })
}

/// Leave-one-subject-out: train on every other subject, evaluate on the held-out
/// one, optionally fine-tune on a calibration share of its trials and evaluate
/// on the rest.
///
/// Conditions: `all_but_one` (the whole held-out subject), and with fine-tuning
/// `all_but_one_eval` (pretrained scorer on the evaluation split) and
/// `fine_tuned` (same split after calibration).
pub fn run_loso(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    pool(cfg.jobs)?.install(|| {
        let ds = load_dataset(cfg, false)?;
        if ds.subjects.len() < 2 {
            return Err(Error::Config("leave-one-subject-out needs at least two subjects".into()));
        }
        let mut report = ExperimentReport::new("loso", cfg);
        report.models = model_infos(cfg)?;
        let units: Vec<(ModelKind, usize)> = (0..ds.subjects.len())
            .flat_map(|s| cfg.models.iter().map(move |&m| (m, s)))
            .collect();
        type Outcome = (Vec<FoldResult>, Option<TransferRow>, Vec<String>);
        let outcomes = units
            .par_iter()
            .map(|&(model, held)| -> Result<Outcome> {
                let heldout = &ds.subjects[held];
                let label = subject_label(heldout.subject_ids[0]);
                let others: Vec<&EpochSet> = ds
                    .subjects
                    .iter()
                    .enumerate()
                    .filter(|&(i, _)| i != held)
                    .map(|(_, s)| s)
                    .collect();
                let train = EpochSet::concat(&others)?;
                let tag = format!("loso/{}/{label}", model.name());
                let trained = train_unit(cfg, model, &train, &tag)?;
                let mut warnings = Vec::new();
                let mut results = Vec::new();
                let mut push = |condition: &str, trained: &Trained, epochs: &EpochSet, log: &TrainingLog| -> Result<()> {
                    let (accuracy, n_trials, w) = decode_accuracy(cfg, trained, epochs)?;
                    warnings.extend(w.map(|w| format!("{model} {label} {condition}: {w}")));
                    results.push(FoldResult {
                        model,
                        subject: label.clone(),
                        condition: condition.to_string(),
                        fold: 0,
                        accuracy,
                        n_trials,
                        epoch_losses: log.epoch_losses.clone(),
                    });
                    Ok(())
                };
                push("all_but_one", &trained, heldout, &trained.log)?;
                let mut transfer = None;
                if cfg.fine_tune && model.is_network() {
                    let (cal_idx, eval_idx) = split_fraction(
                        heldout,
                        cfg.calibration_fraction,
                        cfg.repetitions,
                        seed::derive(cfg.seed, &format!("calibration/{label}")),
                    )?;
                    let calibration = heldout.subset(&cal_idx);
                    let evaluation = heldout.subset(&eval_idx);
                    push("all_but_one_eval", &trained, &evaluation, &TrainingLog::default())?;
                    let mut tuned = Trained {
                        scorer: trained.scorer.clone(),
                        log: TrainingLog::default(),
                        standardizer: trained.standardizer.clone(),
                    };
                    let schedule = cfg
                        .fine_tune_training
                        .schedule(seed::derive(cfg.seed, &format!("{tag}/fine_tune")));
                    tuned.log = tuned.scorer.fine_tune(&tuned.prepare(&calibration), &schedule)?;
                    push("fine_tuned", &tuned, &evaluation, &tuned.log)?;
                    transfer = Some(TransferRow {
                        model,
                        subject: label.clone(),
                        auc_before: auc(&trained.scores(&evaluation)?, &evaluation.labels)?,
                        auc_after: auc(&tuned.scores(&evaluation)?, &evaluation.labels)?,
                    });
                }
                Ok((results, transfer, warnings))
            })
            .collect::<Result<Vec<_>>>()?;
        for (results, transfer, warnings) in outcomes {
            report.folds.extend(results);
            report.transfer.extend(transfer);
            report.warnings.extend(warnings);
        }
        if cfg.fine_tune && cfg.models.contains(&ModelKind::Lda) {
            report.warnings.push("lda is not fine-tuned; only all_but_one is reported".into());
        }
        report.summarize();
        Ok(report)
    })
}

fn jitter_condition(level: i64) -> String {
    if level == 0 {
        "baseline".to_string()
    } else {
        format!("jitter_{level}ms")
    }
}

/// Pooled cross-validation trained at zero jitter, with held-out trials
/// re-extracted at every onset shift. The baseline level decodes the very
/// epochs of [`run_pooled`] with the same scorers.
pub fn run_noise_sweep(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let levels = cfg.sweep_levels();
    pool(cfg.jobs)?.install(|| {
        let ds = load_dataset(cfg, true)?;
        let recs = ds.recordings.as_ref().expect("recordings kept");
        let shifted: Vec<EpochSet> = levels
            .par_iter()
            .map(|&level| -> Result<EpochSet> {
                if level == 0 {
                    return EpochSet::concat(&ds.subjects.iter().collect::<Vec<_>>());
                }
                let per_subject = recs
                    .iter()
                    .map(|r| preprocess(r, level, cfg.downsample))
                    .collect::<Result<Vec<_>>>()?;
                EpochSet::concat(&per_subject.iter().collect::<Vec<_>>())
            })
            .collect::<Result<Vec<_>>>()?;
        let mut report = ExperimentReport::new("noise_sweep", cfg);
        report.models = model_infos(cfg)?;
        let groups = vec![("all".to_string(), shifted[0].clone())];
        let mut warnings = Vec::new();
        let units = cv_units(cfg, Scope::Pooled, &groups, &mut warnings)?;
        let outcomes = units
            .par_iter()
            .map(|u| -> Result<Vec<(FoldResult, Option<String>)>> {
                let train = u.epochs.subset(&u.train);
                let trained = train_unit(cfg, u.model, &train, &cv_tag(Scope::Pooled, u.model, u.label, u.fold))?;
                levels
                    .iter()
                    .zip(&shifted)
                    .map(|(&level, epochs)| {
                        let test = epochs.subset(&u.test);
                        let (accuracy, n_trials, w) = decode_accuracy(cfg, &trained, &test)?;
                        Ok((
                            FoldResult {
                                model: u.model,
                                subject: "all".into(),
                                condition: jitter_condition(level),
                                fold: u.fold,
                                accuracy,
                                n_trials,
                                epoch_losses: if level == 0 {
                                    trained.log.epoch_losses.clone()
                                } else {
                                    Vec::new()
                                },
                            },
                            w,
                        ))
                    })
                    .collect()
            })
            .collect::<Result<Vec<_>>>()?;
        for unit in outcomes {
            for (f, w) in unit {
                report.folds.push(f);
                warnings.extend(w);
            }
        }
        for &model in &cfg.models {
            for &level in &levels {
                let accs: Vec<f64> = report
                    .folds
                    .iter()
                    .filter(|f| f.model == model && f.condition == jitter_condition(level))
                    .map(|f| f.accuracy)
                    .collect();
                report.noise.push(NoiseRow {
                    model,
                    level_ms: level,
                    mean_accuracy: accs.iter().sum::<f64>() / accs.len() as f64,
                    fold_accuracies: accs,
                });
            }
        }
        for &level in &levels {
            for (i, &a) in cfg.models.iter().enumerate() {
                for &b in &cfg.models[i + 1..] {
                    let get = |m: ModelKind| {
                        report
                            .noise
                            .iter()
                            .find(|r| r.model == m && r.level_ms == level)
                            .map(|r| r.fold_accuracies.clone())
                            .unwrap_or_default()
                    };
                    let (result, note) = match welch_t_test(&get(a), &get(b)) {
                        Ok(t) => (Some(t), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    report.t_tests.push(TTestRow {
                        level_ms: level,
                        model_a: a,
                        model_b: b,
                        result,
                        note,
                    });
                }
            }
        }
        report.warnings = warnings;
        report.summarize();
        Ok(report)
    })
}

/// Trains each saliency model on a trial-level share of the pooled data and
/// maps its mean absolute input gradient over the held-out target epochs.
pub fn run_saliency(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.saliency_models.is_empty() {
        return Err(Error::Config("no saliency models selected".into()));
    }
    pool(cfg.jobs)?.install(|| {
        let ds = load_dataset(cfg, false)?;
        let all = EpochSet::concat(&ds.subjects.iter().collect::<Vec<_>>())?;
        let (train_idx, held_idx) = split_fraction(
            &all,
            cfg.calibration_fraction,
            cfg.repetitions,
            seed::derive(cfg.seed, "saliency/split"),
        )?;
        let train = all.subset(&train_idx);
        let held = all.subset(&held_idx);
        let targets: Vec<usize> = (0..held.len()).filter(|&i| held.labels[i] == 1).collect();
        let targets = held.subset(&targets);
        let mut report = ExperimentReport::new("saliency", cfg);
        report.models = model_infos(&ExperimentConfig {
            models: cfg.saliency_models.clone(),
            ..cfg.clone()
        })?;
        let outcomes = cfg
            .saliency_models
            .par_iter()
            .map(|&model| -> Result<(SaliencyResult, FoldResult)> {
                let trained = train_unit(cfg, model, &train, &format!("saliency/{}", model.name()))?;
                let Scorer::Net(net) = &trained.scorer else {
                    return Err(Error::Config(format!("saliency needs a network, got {model}")));
                };
                let map = saliency_map(net, &trained.prepare(&targets))?;
                let times = column_times_ms(map.ncols(), targets.sampling_rate);
                let (accuracy, n_trials, _) = decode_accuracy(cfg, &trained, &held)?;
                Ok((
                    SaliencyResult {
                        model,
                        n_epochs: targets.len(),
                        mass_fraction_200_500: mass_fraction(&map, &times, 200.0, 500.0),
                        uniform_share_200_500: uniform_share(&times, 200.0, 500.0),
                        times_ms: times,
                        matrix: map.outer_iter().map(|r| r.to_vec()).collect(),
                    },
                    FoldResult {
                        model,
                        subject: "all".into(),
                        condition: "saliency_holdout".into(),
                        fold: 0,
                        accuracy,
                        n_trials,
                        epoch_losses: trained.log.epoch_losses,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        for (s, f) in outcomes {
            report.saliency.push(s);
            report.folds.push(f);
        }
        report.summarize();
        Ok(report)
    })
}
