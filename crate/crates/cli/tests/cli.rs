use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const TINY: &str = r#"
models = ["lda", "cnn"]
folds = 2
repetitions = 2
n_chars = 5
saliency_models = ["cnn"]
saliency_svg = false

[training]
phases = [[2, 1e-3], [1, 1e-5]]

[fine_tune_training]
phases = [[1, 1e-4]]

[dims]
channels = 55
samples = 25
spatial_maps = 2
temporal_filters = 2
fc_widths = [4, 3]
lstm_small = 3
lstm_large = 4

[data.synthetic]
n_subjects = 2
n_chars = 5
n_trials_per_subject = 4
n_repetitions = 2
seed = 5

[data.synthetic.p300]
amplitude = 3.0
"#;

const KEYS: &[&str] = &[
    "models", "scope", "folds", "repetitions", "n_chars", "downsample", "noise_levels_ms", "seed",
    "fine_tune", "calibration_fraction", "standardize", "saliency_models", "saliency_svg", "jobs",
    "[training]", "[fine_tune_training]", "phases", "batch_size", "rho", "eps", "pos_weight",
    "[dims]", "channels", "samples", "spatial_maps", "temporal_filters", "kernel", "stride",
    "fc_widths", "lstm_small", "lstm_large", "[data.synthetic]", "[data.containers]", "paths",
    "n_subjects", "n_channels", "n_trials_per_subject", "n_repetitions", "sampling_rate", "soa_ms",
    "jitter_margin_ms", "[data.synthetic.p300]", "latency_ms", "width_ms", "amplitude",
    "[data.synthetic.noise]", "ar_coefficient", "std", "[data.synthetic.variation]",
    "latency_std_ms", "amplitude_scale_std",
];

fn p300(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_p300"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = p300(dir, args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn setup() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("tiny.toml"), TINY).unwrap();
    dir
}

fn report(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path.join("report.json")).unwrap()).unwrap()
}

fn accuracies(r: &serde_json::Value) -> Vec<String> {
    let mut v: Vec<String> = r["folds"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| format!("{} {} {} {}", f["model"], f["subject"], f["fold"], f["accuracy"]))
        .collect();
    v.sort();
    v
}

#[test]
fn help_documents_every_config_key() {
    let dir = setup();
    let help = ok(dir.path(), &["--help"]);
    for key in KEYS {
        assert!(help.contains(key), "missing {key}");
    }
    for sub in ["gen", "train", "eval", "xsubject", "noise", "saliency"] {
        assert!(help.contains(sub), "missing {sub}");
    }
}

#[test]
fn dumped_config_round_trips() {
    let dir = setup();
    let first = ok(dir.path(), &["--config", "tiny.toml", "--seed", "9", "--dump-config", "train"]);
    assert!(first.contains("seed = 9"));
    fs::write(dir.path().join("dumped.toml"), &first).unwrap();
    let second = ok(dir.path(), &["--config", "dumped.toml", "--dump-config", "train"]);
    assert_eq!(first, second);
    let defaults = ok(dir.path(), &["--dump-config", "gen"]);
    fs::write(dir.path().join("defaults.toml"), &defaults).unwrap();
    assert_eq!(defaults, ok(dir.path(), &["--config", "defaults.toml", "--dump-config", "gen"]));
}

#[test]
fn configuration_errors_exit_with_code_two() {
    let dir = setup();
    fs::write(dir.path().join("bad.toml"), "folds = 2\nfoldz = 3\n").unwrap();
    let out = p300(dir.path(), &["--config", "bad.toml", "train"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("foldz") && err.contains("line 2"), "{err}");

    let out = p300(dir.path(), &["--config", "missing.toml", "train"]);
    assert_eq!(out.status.code(), Some(2));
    let out = p300(dir.path(), &["--config", "tiny.toml", "--models", "lda", "--jobs", "0", "train"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_checkpoints_are_a_data_error() {
    let dir = setup();
    let out = p300(dir.path(), &["--config", "tiny.toml", "eval", "--checkpoints", "nowhere"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_is_reproducible() {
    let dir = setup();
    let a = ok(dir.path(), &["--config", "tiny.toml", "--out", "a", "gen"]);
    let b = ok(dir.path(), &["--config", "tiny.toml", "--out", "b", "gen"]);
    assert_eq!(a.replace("a/", ""), b.replace("b/", ""));
    assert!(a.contains("subjects: 2"));
    assert!(a.contains("epochs: 80"));
    assert!(a.contains("target fraction: 0.200000"));
    for f in ["subject01.p3ep", "subject02.p3ep"] {
        assert_eq!(
            fs::read(dir.path().join("a").join(f)).unwrap(),
            fs::read(dir.path().join("b").join(f)).unwrap()
        );
    }
    let c = ok(dir.path(), &["--config", "tiny.toml", "--seed", "6", "--out", "c", "gen"]);
    assert_ne!(a.replace("a/", ""), c.replace("c/", ""));
}

#[test]
fn eval_replays_train() {
    let dir = setup();
    let headline = ok(dir.path(), &["--config", "tiny.toml", "train"]);
    assert!(headline.contains("lda") && headline.contains("cnn"));
    ok(dir.path(), &["--config", "tiny.toml", "eval"]);
    let out = dir.path().join("out");
    assert!(out.join("checkpoints/manifest.json").exists());
    assert!(out.join("tables/accuracy.csv").exists());
    let trained = accuracies(&report(&out));
    assert_eq!(trained.len(), 2 * 2 * 2);
    assert_eq!(trained, accuracies(&report(&out.join("eval"))));
}

#[test]
fn noise_reports_seven_levels_per_model() {
    let dir = setup();
    ok(dir.path(), &["--config", "tiny.toml", "noise"]);
    let r = report(&dir.path().join("out"));
    for m in ["lda", "cnn"] {
        let mut levels: Vec<i64> = r["noise"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|n| n["model"] == m)
            .map(|n| n["level_ms"].as_i64().unwrap())
            .collect();
        levels.sort();
        assert_eq!(levels, vec![-120, -80, -40, 0, 40, 80, 120], "{m}");
    }
}

#[test]
fn saliency_writes_a_channel_by_time_table() {
    let dir = setup();
    ok(dir.path(), &["--config", "tiny.toml", "saliency"]);
    let csv = fs::read_to_string(dir.path().join("out/saliency/cnn.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 55);
    assert!(lines.iter().all(|l| l.split(',').count() == 25));
    assert!(!dir.path().join("out/saliency/cnn.svg").exists());
}

#[test]
fn thread_count_does_not_change_output() {
    let dir = setup();
    ok(dir.path(), &["--config", "tiny.toml", "--fine-tune", "true", "--out", "one", "xsubject"]);
    ok(dir.path(), &["--config", "tiny.toml", "--out", "four", "--jobs", "4", "xsubject"]);
    for f in ["report.json", "tables/accuracy.csv", "tables/transfer.csv"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(f)).unwrap(),
            fs::read(dir.path().join("four").join(f)).unwrap(),
            "{f}"
        );
    }
}
