use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;
use p300::data::{save_epochs, EpochSet};
use p300::harness::{self, DataSource, ExperimentConfig, ExperimentReport};
use p300::models::ModelKind;
use p300::{Error, ErrorKind};
use sha2::{Digest, Sha256};

const CONFIG_HELP: &str = "\
CONFIG FILE (TOML; unknown keys are rejected, omitted keys take the defaults shown)

  models = [\"lda\", \"cnn\", \"lstm_large\", \"lstm_small\", \"lstm_cnn_large\", \"lstm_cnn_small\"]
  scope = \"within_subject\"        # train/eval: \"within_subject\" or \"pooled\"
  folds = 10                      # cross-validation folds over spelled characters
  repetitions = 10                # R: presentation sequences averaged per character
  n_chars = 30                    # C: alphabet size
  downsample = 8                  # decimation after windowing (200 Hz -> 25 Hz)
  noise_levels_ms = [-120, -80, -40, 40, 80, 120]   # onset shifts; 0 is always added
  seed = 0                        # root seed for folds, initialization and shuffling
  fine_tune = true                # xsubject: calibrate networks on the held-out subject
  calibration_fraction = 0.75     # xsubject calibration share; saliency training share
  standardize = false             # z-score features with training statistics
  saliency_models = [\"cnn\", \"lstm_cnn_small\"]
  saliency_svg = true
  jobs = 1                        # worker threads; results do not depend on it

  [training]                      # also [fine_tune_training], default phases = [[30, 1e-4]]
  phases = [[30, 1e-3], [30, 1e-5]]   # (epochs, learning rate) run in order
  batch_size = 64
  rho = 0.9                       # RMSProp decay
  eps = 1e-8                      # RMSProp epsilon
  pos_weight = 1.0                # loss weight of target epochs

  [dims]
  channels = 55
  samples = 25
  spatial_maps = 10
  temporal_filters = 13
  kernel = 5
  stride = 5
  fc_widths = [50, 20]
  lstm_small = 30
  lstm_large = 100

  [data.synthetic]                # or: [data.containers] paths = [\"a.p3ep\", ...]
  n_subjects = 11
  n_channels = 55
  n_chars = 30
  n_trials_per_subject = 60       # spelled characters, each shown n_repetitions times
  n_repetitions = 10
  sampling_rate = 200.0
  soa_ms = 116.0
  jitter_margin_ms = 120
  seed = 0
  [data.synthetic.p300]
  latency_ms = 300.0
  width_ms = 200.0
  amplitude = 1.0
  channels = [20, 21, ..., 34]
  [data.synthetic.noise]
  ar_coefficient = 0.9
  std = 1.0
  [data.synthetic.variation]
  latency_std_ms = 20.0
  amplitude_scale_std = 0.1

Flags override file keys; --seed sets both `seed` and `data.synthetic.seed`.

OUTPUT
  <out>/report.json, <out>/tables/*.csv, <out>/saliency/*.csv|svg,
  <out>/checkpoints/* (train), <out>/subjectNN.p3ep (gen)

EXIT CODES
  0 success, 2 configuration error, 3 data error, 4 numeric failure";

#[derive(Parser)]
#[command(name = "p300", version, about = "P300 RSVP speller experiments", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Comma-separated model kinds.
    #[arg(long, global = true, value_delimiter = ',', value_parser = parse_model)]
    models: Option<Vec<ModelKind>>,
    #[arg(long, global = true, action = ArgAction::Set)]
    fine_tune: Option<bool>,
    /// Print the effective configuration as TOML and exit.
    #[arg(long, global = true)]
    dump_config: bool,
    /// More log output (repeatable).
    #[arg(short, long, global = true, action = ArgAction::Count)]
    verbose: u8,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic subjects and save them as epoch containers.
    Gen,
    /// Cross-validate the models and save checkpoints.
    Train,
    /// Replay saved checkpoints on their held-out trials.
    Eval {
        /// Checkpoint directory [default: <out>/checkpoints]; the report goes to <out>/eval.
        #[arg(long)]
        checkpoints: Option<PathBuf>,
    },
    /// Leave-one-subject-out transfer with optional fine-tuning.
    Xsubject,
    /// Temporal-noise sweep over onset shifts.
    Noise,
    /// Input-gradient saliency maps.
    Saliency,
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse::<ModelKind>().map_err(|e| e.to_string())
}

fn load_config(common: &Common) -> p300::Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
        if let DataSource::Synthetic(s) = &mut cfg.data {
            s.seed = seed;
        }
    }
    if let Some(jobs) = common.jobs {
        cfg.jobs = jobs;
    }
    if let Some(models) = &common.models {
        cfg.models = models.clone();
    }
    if let Some(f) = common.fine_tune {
        cfg.fine_tune = f;
    }
    Ok(cfg)
}

fn write_report(report: &ExperimentReport, dir: &Path) -> p300::Result<()> {
    report.write_to(dir)?;
    info!("wrote {} report to {}", report.experiment, dir.display());
    print!("{}", report.headline());
    Ok(())
}

fn gen(cfg: &ExperimentConfig, out: &Path) -> p300::Result<()> {
    if !matches!(cfg.data, DataSource::Synthetic(_)) {
        return Err(Error::Config("gen needs a synthetic data source".into()));
    }
    cfg.validate()?;
    let ds = harness::load_dataset(cfg, false)?;
    fs::create_dir_all(out)?;
    let mut n_epochs = 0;
    let mut n_targets = 0;
    for s in &ds.subjects {
        let path = out.join(format!("{}.p3ep", harness::subject_label(s.subject_ids[0])));
        save_epochs(s, &path)?;
        let digest = hex::encode(Sha256::digest(fs::read(&path)?));
        println!("{}  {} epochs  sha256 {digest}", path.display(), s.len());
        n_epochs += s.len();
        n_targets += s.labels.iter().filter(|&&l| l == 1).count();
    }
    let first: &EpochSet = &ds.subjects[0];
    println!("subjects: {}", ds.subjects.len());
    println!("epochs: {n_epochs} ({} channels x {} samples at {} Hz)", first.n_channels(), first.n_samples(), first.sampling_rate);
    println!("target fraction: {:.6} ({n_targets}/{n_epochs})", n_targets as f64 / n_epochs as f64);
    Ok(())
}

fn run(cli: Cli) -> p300::Result<()> {
    let cfg = load_config(&cli.common)?;
    if cli.common.dump_config {
        let text = toml::to_string(&cfg).map_err(|e| Error::Config(e.to_string()))?;
        print!("{text}");
        return Ok(());
    }
    let out = &cli.common.out;
    match cli.command {
        Command::Gen => gen(&cfg, out),
        Command::Train => {
            let report = harness::run_cv(&cfg, cfg.scope, Some(&out.join("checkpoints")))?;
            write_report(&report, out)
        }
        Command::Eval { checkpoints } => {
            let dir = checkpoints.unwrap_or_else(|| out.join("checkpoints"));
            let report = harness::evaluate_checkpoints(&cfg, &dir)?;
            write_report(&report, &out.join("eval"))
        }
        Command::Xsubject => write_report(&harness::run_loso(&cfg)?, out),
        Command::Noise => write_report(&harness::run_noise_sweep(&cfg)?, out),
        Command::Saliency => write_report(&harness::run_saliency(&cfg)?, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            })
        }
    }
}
