//! `biteweight` command-line interface.
//!
//! Exit codes: 0 success, 1 validation or runtime error, 2 usage error
//! (bad flags, missing input files).

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use biteweight::boutfeat::{FeatureSetId, Regime};
use biteweight::chewfeat::{extract_chew_descriptor, write_descriptor_csv, DescriptorRow};
use biteweight::dataset::{load_dataset, load_dataset_unchecked, synth_generate, validate, write_dataset, SynthConfig};
use biteweight::estimators::{EstimatorKind, EstimatorSettings};
use biteweight::harness::{
    feature_table, loso_run_with_jobs, train_model, write_outputs, EvalReport, ExperimentConfig,
};
use biteweight::codebook::DEFAULT_K_MAX;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "biteweight", version, about = "Bite-weight estimation from chewing audio")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (WAV + JSON annotations).
    Synth {
        /// Synthesizer configuration JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the configuration's seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a dataset directory and list every invariant violation.
    Validate {
        #[arg(long)]
        data: PathBuf,
    },
    /// Write the bout feature matrix of one feature set as CSV.
    Features {
        #[arg(long)]
        data: PathBuf,
        /// F1..F5.
        #[arg(long)]
        set: FeatureSetId,
        /// Apple, Banana, Rice, Chips or All.
        #[arg(long, default_value = "All")]
        regime: Regime,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        /// Output CSV.
        #[arg(long)]
        out: PathBuf,
        /// Also write raw per-chew descriptors to this CSV.
        #[arg(long)]
        descriptors: Option<PathBuf>,
    },
    /// Train one model on every bout of a regime and write it as JSON.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// LR, SVR, FFNN or GRNN.
        #[arg(long)]
        estimator: EstimatorKind,
        /// F1..F5.
        #[arg(long)]
        set: FeatureSetId,
        /// Apple, Banana, Rice, Chips or All.
        #[arg(long)]
        regime: Regime,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_K_MAX)]
        k_max: usize,
        /// Experiment configuration JSON supplying estimator search settings.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output model JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the leave-one-subject-out grid and write tables, plot and report.
    Loso {
        /// Dataset directory; overrides the configuration's `dataset`.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Experiment configuration JSON; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output directory; overrides the configuration's `out`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configuration's master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configuration's k_max.
        #[arg(long)]
        k_max: Option<usize>,
        /// Worker threads (0 = all cores). Output does not depend on it.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Re-render tables, plot and metadata from a report.json.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<biteweight::Error> for Failure {
    fn from(e: biteweight::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type CliResult = Result<(), Failure>;

fn require(flag: &str, path: &Path) -> Result<(), Failure> {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{flag}: no such file or directory: {}", path.display())))
    }
}

fn read_json<T: serde::de::DeserializeOwned>(flag: &str, path: &Path) -> Result<T, Failure> {
    require(flag, path)?;
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, body: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, body).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable value");
    s.push('\n');
    s
}

fn synth(config: Option<PathBuf>, out: PathBuf, seed: Option<u64>) -> CliResult {
    let mut cfg: SynthConfig = match config {
        Some(p) => read_json("--config", &p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    cfg.check()?;
    let ds = synth_generate(&cfg)?;
    write_dataset(&ds, &out)?;
    eprintln!(
        "wrote {} recordings, {} bouts to {}",
        ds.recordings.len(),
        ds.n_bouts(),
        out.display()
    );
    Ok(())
}

fn validate_cmd(data: PathBuf) -> CliResult {
    require("--data", &data)?;
    let ds = load_dataset_unchecked(&data)?;
    let report = validate(&ds);
    if report.is_empty() {
        println!(
            "ok: {} recordings, {} bouts, {} subjects",
            ds.recordings.len(),
            ds.n_bouts(),
            ds.subjects().len()
        );
        Ok(())
    } else {
        print!("{report}");
        Err(Failure::Runtime(format!("{} validation issue(s)", report.issues.len())))
    }
}

fn load(data: &Path) -> Result<biteweight::dataset::Dataset, Failure> {
    require("--data", data)?;
    Ok(load_dataset(data)?)
}

#[allow(clippy::too_many_arguments)]
fn features(
    data: PathBuf,
    set: FeatureSetId,
    regime: Regime,
    seed: u64,
    k_max: usize,
    out: PathBuf,
    descriptors: Option<PathBuf>,
) -> CliResult {
    let ds = load(&data)?;
    let table = feature_table(&ds, set, regime, k_max, seed)?;
    write_text(&out, &table.to_csv(&ds)?)?;

    if let Some(path) = descriptors {
        let mut owned = Vec::new();
        // Bout numbers run over the whole dataset in file order.
        for (n, (id, b)) in ds.bouts().enumerate() {
            let rec = &ds.recordings[id.recording];
            for (c, chew) in b.chews.iter().enumerate() {
                let d = extract_chew_descriptor(&rec.chew_samples(chew), rec.sample_rate_hz as f64)?;
                owned.push((b.subject_id.as_str(), n, c, d));
            }
        }
        let file = fs::File::create(&path)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
        write_descriptor_csv(
            BufWriter::new(file),
            owned.iter().map(|(s, b, c, d)| DescriptorRow {
                subject: s,
                bout: *b,
                chew: *c,
                descriptor: d,
            }),
        )?;
    }
    eprintln!("wrote {} rows × {} features to {}", table.rows.len(), table.names.len(), out.display());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn train(
    data: PathBuf,
    estimator: EstimatorKind,
    set: FeatureSetId,
    regime: Regime,
    seed: u64,
    k_max: usize,
    config: Option<PathBuf>,
    out: PathBuf,
) -> CliResult {
    let settings = match config {
        Some(p) => read_json::<ExperimentConfig>("--config", &p)?.estimator_settings,
        None => EstimatorSettings::default(),
    };
    let ds = load(&data)?;
    let model = train_model(&ds, estimator, set, regime, &settings, k_max, seed)?;
    write_text(&out, &to_json(&model))?;
    for w in &model.model.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!(
        "trained {estimator} on {set} ({regime}, {} bouts) -> {}",
        model.n_training_bouts,
        out.display()
    );
    Ok(())
}

fn loso(
    data: Option<PathBuf>,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    seed: Option<u64>,
    k_max: Option<usize>,
    jobs: usize,
) -> CliResult {
    let mut cfg: ExperimentConfig = match &config {
        Some(p) => read_json("--config", p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(d) = data {
        cfg.dataset = Some(d);
    }
    if let Some(o) = out {
        cfg.out = Some(o);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(k) = k_max {
        cfg.k_max = k;
    }
    let data = cfg
        .dataset
        .clone()
        .ok_or_else(|| Failure::Usage("--data: required (or set `dataset` in --config)".into()))?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| Failure::Usage("--out: required (or set `out` in --config)".into()))?;
    cfg.check()?;
    let ds = load(&data)?;
    let report = loso_run_with_jobs(&ds, &cfg, jobs)?;
    let files = write_outputs(&report, &out)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    eprintln!("wrote {} to {}", files.join(", "), out.display());
    Ok(())
}

fn report(input: PathBuf, out: PathBuf) -> CliResult {
    let r: EvalReport = read_json("--in", &input)?;
    let files = write_outputs(&r, &out)?;
    eprintln!("wrote {} to {}", files.join(", "), out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth { config, out, seed } => synth(config, out, seed),
        Command::Validate { data } => validate_cmd(data),
        Command::Features {
            data,
            set,
            regime,
            seed,
            k_max,
            out,
            descriptors,
        } => features(data, set, regime, seed, k_max, out, descriptors),
        Command::Train {
            data,
            estimator,
            set,
            regime,
            seed,
            k_max,
            config,
            out,
        } => train(data, estimator, set, regime, seed, k_max, config, out),
        Command::Loso {
            data,
            config,
            out,
            seed,
            k_max,
            jobs,
        } => loso(data, config, out, seed, k_max, jobs),
        Command::Report { input, out } => report(input, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
