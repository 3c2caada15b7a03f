use ndarray::Array3;
use p300::data::{save_epochs, EpochSet, P300Config, SyntheticConfig};
use p300::harness::*;
use p300::models::{ModelDims, ModelKind};
use p300::nn::{LayerSpec, Network, Shape};
use p300::Error;

fn tiny() -> ExperimentConfig {
    ExperimentConfig {
        data: DataSource::Synthetic(SyntheticConfig {
            n_subjects: 2,
            n_channels: 6,
            n_chars: 5,
            n_trials_per_subject: 4,
            n_repetitions: 2,
            p300: P300Config {
                amplitude: 3.0,
                channels: vec![2, 3],
                ..P300Config::default()
            },
            seed: 3,
            ..SyntheticConfig::default()
        }),
        folds: 2,
        repetitions: 2,
        n_chars: 5,
        noise_levels_ms: vec![-40, 40, 120],
        training: TrainingConfig::from_phases(&[(2, 1e-3), (1, 1e-5)]),
        fine_tune_training: TrainingConfig::from_phases(&[(1, 1e-4)]),
        dims: ModelDims {
            channels: 6,
            samples: 25,
            spatial_maps: 3,
            temporal_filters: 2,
            kernel: 5,
            stride: 5,
            fc_widths: [6, 4],
            lstm_small: 4,
            lstm_large: 6,
        },
        saliency_models: vec![ModelKind::Cnn, ModelKind::LstmCnnSmall],
        ..ExperimentConfig::default()
    }
}

fn files(report: &ExperimentReport) -> Vec<(String, Vec<u8>)> {
    report.files().unwrap()
}

#[test]
fn reports_are_byte_identical_across_runs_and_thread_counts() {
    let cfg = tiny();
    let many = ExperimentConfig { jobs: 3, ..cfg.clone() };
    type Runner = fn(&ExperimentConfig) -> p300::Result<ExperimentReport>;
    let runners: [(&str, Runner); 4] = [
        ("within", run_within_subject),
        ("loso", run_loso),
        ("noise", run_noise_sweep),
        ("saliency", run_saliency),
    ];
    for (name, run) in runners {
        let a = files(&run(&cfg).unwrap());
        let b = files(&run(&cfg).unwrap());
        let c = files(&run(&many).unwrap());
        assert!(a == b, "{name}: rerun differs");
        assert!(a == c, "{name}: jobs = 3 differs");
    }
}

#[test]
fn within_subject_report_has_every_fold() {
    let cfg = tiny();
    let r = run_within_subject(&cfg).unwrap();
    assert_eq!(r.folds.len(), 6 * 2 * 2);
    assert!(r.folds.iter().all(|f| f.n_trials == 2 && (0.0..=1.0).contains(&f.accuracy)));
    assert_eq!(r.models.len(), 6);
    for m in ModelKind::ALL {
        assert!(r.mean_accuracy(m, "within_subject").is_some());
    }
    let losses = &r.folds.iter().find(|f| f.model == ModelKind::Cnn).unwrap().epoch_losses;
    assert_eq!(losses.len(), 3);
    let names: Vec<String> = files(&r).into_iter().map(|f| f.0).collect();
    assert!(names.contains(&"report.json".to_string()));
    assert!(names.contains(&"tables/accuracy.csv".to_string()));
}

#[test]
fn evaluating_checkpoints_replays_training_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig {
        standardize: true,
        ..tiny()
    };
    for scope in [Scope::WithinSubject, Scope::Pooled] {
        let ck = dir.path().join(format!("{scope:?}"));
        let trained = run_cv(&cfg, scope, Some(&ck)).unwrap();
        let replayed = evaluate_checkpoints(&cfg, &ck).unwrap();
        let acc = |r: &ExperimentReport| {
            let mut v: Vec<_> = r
                .folds
                .iter()
                .map(|f| (f.model, f.subject.clone(), f.fold, f.accuracy.to_bits(), f.n_trials))
                .collect();
            v.sort();
            v
        };
        assert_eq!(acc(&trained), acc(&replayed));
        assert!(ck.join(MANIFEST_FILE).exists());
    }
}

#[test]
fn noise_sweep_baseline_is_pooled_cross_validation() {
    let cfg = tiny();
    let sweep = run_noise_sweep(&cfg).unwrap();
    let pooled = run_pooled(&cfg).unwrap();
    for m in ModelKind::ALL {
        let base: Vec<f64> = sweep
            .folds
            .iter()
            .filter(|f| f.model == m && f.condition == "baseline")
            .map(|f| f.accuracy)
            .collect();
        let cv: Vec<f64> = pooled.folds.iter().filter(|f| f.model == m).map(|f| f.accuracy).collect();
        assert_eq!(base, cv, "{m}");
        assert_eq!(sweep.noise_accuracy(m, 0), pooled.mean_accuracy(m, "pooled"));
    }
    // 4 levels, 15 model pairs
    assert_eq!(sweep.noise.len(), 6 * 4);
    assert_eq!(sweep.t_tests.len(), 15 * 4);
    assert!(sweep.t_tests.iter().all(|t| t.result.is_some() != t.note.is_some()));
}

#[test]
fn loso_reports_transfer_for_networks_only() {
    let r = run_loso(&tiny()).unwrap();
    assert_eq!(r.transfer.len(), 5 * 2);
    let conds = |m: ModelKind| {
        let mut c: Vec<&str> = r.folds.iter().filter(|f| f.model == m).map(|f| f.condition.as_str()).collect();
        c.sort();
        c.dedup();
        c
    };
    assert_eq!(conds(ModelKind::Lda), vec!["all_but_one"]);
    assert_eq!(conds(ModelKind::Cnn), vec!["all_but_one", "all_but_one_eval", "fine_tuned"]);
    assert!(r.transfer.iter().all(|t| (0.0..=1.0).contains(&t.auc_before) && (0.0..=1.0).contains(&t.auc_after)));
}

#[test]
fn noise_sweep_needs_a_synthetic_source() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.p3ep");
    let e = EpochSet {
        data: Array3::zeros((2, 6, 25)),
        labels: vec![1, 0],
        char_ids: vec![0, 1],
        trial_ids: vec![0, 0],
        subject_ids: vec![0, 0],
        onsets: vec![0, 1],
        sampling_rate: 25.0,
    };
    save_epochs(&e, &path).unwrap();
    let cfg = ExperimentConfig {
        data: DataSource::Containers { paths: vec![path] },
        ..tiny()
    };
    assert!(matches!(run_noise_sweep(&cfg), Err(Error::Config(_))));
}

#[test]
fn container_source_matches_in_memory_generation() {
    let cfg = tiny();
    let dir = tempfile::tempdir().unwrap();
    let ds = load_dataset(&cfg, false).unwrap();
    let paths: Vec<_> = ds
        .subjects
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let p = dir.path().join(format!("{i}.p3ep"));
            save_epochs(s, &p).unwrap();
            p
        })
        .collect();
    let from_files = ExperimentConfig {
        data: DataSource::Containers { paths },
        ..cfg.clone()
    };
    let a = run_within_subject(&cfg).unwrap();
    let b = run_within_subject(&from_files).unwrap();
    assert_eq!(a.folds, b.folds);
}

#[test]
fn linear_scorer_saliency_is_proportional_to_the_weights() {
    let (features, steps) = (4, 6);
    let net = Network::new(
        Shape::Seq { features, steps },
        vec![LayerSpec::SigmoidUnit { inputs: features * steps }],
        5,
    )
    .unwrap();
    let w = &net.flat_values()[..features * steps];
    let n = 7;
    let e = EpochSet {
        data: Array3::from_shape_fn((n, features, steps), |(i, c, s)| ((i * 7 + c * 3 + s) % 5) as f64 - 2.0),
        labels: vec![1; n],
        char_ids: vec![0; n],
        trial_ids: (0..n as u32).collect(),
        subject_ids: vec![0; n],
        onsets: vec![0; n],
        sampling_rate: 25.0,
    };
    let map = saliency_map(&net, &e).unwrap();
    assert_eq!(map.dim(), (features, steps));
    let scale = map[[0, 0]] / w[0].abs();
    assert!(scale > 0.0);
    for (m, w) in map.iter().zip(w) {
        assert!((m - scale * w.abs()).abs() <= 1e-10 * m.abs(), "{m} vs {}", scale * w.abs());
    }
}

#[test]
fn invalid_configs_are_rejected_before_any_work() {
    let bad = [
        ExperimentConfig { folds: 1, ..tiny() },
        ExperimentConfig { n_chars: 6, ..tiny() },
        ExperimentConfig { models: vec![], ..tiny() },
        ExperimentConfig { jobs: 0, ..tiny() },
        ExperimentConfig { saliency_models: vec![ModelKind::Lda], ..tiny() },
        ExperimentConfig { noise_levels_ms: vec![160], ..tiny() },
    ];
    for cfg in bad {
        assert!(matches!(run_within_subject(&cfg), Err(Error::Config(_))), "{cfg:?}");
    }
}
