//! `din`: train, evaluate and analyse Deep Information Networks.
//!
//! Standard output carries only the final JSON document of a command.
//! Progress, warnings and errors go to standard error, one JSON object per
//! line. Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sha2::{Digest, Sha256};

use din::analysis::{check_bounds, mi_flow, quantize_with_model, write_mi_flow_csv};
use din::dataio::{load_model, save_model, RawDataset};
use din::error::Error;
use din::experiment::{evaluate, run_experiment, split_for_run, train_model, ExperimentConfig, RunSeeds};
use din::metrics::{MetricsReport, PhaseReport};

const CKD_URL: &str = "https://archive.ics.uci.edu/static/public/336/chronic+kidney+disease.zip";
const CKD_MEMBER: &str = "chronic_kidney_disease_full.arff";

#[derive(Parser)]
#[command(name = "din", version, about = "Deep Information Network classifier")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set network.beta=2` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Master seed (same as `--set seed=N`).
    #[arg(long)]
    seed: Option<u64>,
    /// Dataset file (same as `--set dataset.path=...`).
    #[arg(long)]
    dataset: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<ExperimentConfig, Error> {
        let mut overrides = self.overrides.clone();
        if let Some(seed) = self.seed {
            overrides.push(format!("seed={seed}"));
        }
        if let Some(path) = &self.dataset {
            overrides.push(format!("dataset.path={}", toml_string(&path.to_string_lossy())));
        }
        match &self.config {
            Some(path) => ExperimentConfig::from_file(path, &overrides),
            None => ExperimentConfig::from_toml("", &overrides),
        }
    }
}

fn toml_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

#[derive(Clone, Copy, ValueEnum)]
enum Partition {
    Train,
    Test,
    All,
}

#[derive(Subcommand)]
enum Cmd {
    /// Train on the training split of one run and save the model.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        /// Which run's split and seeds to use.
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Defaults to the model path with a `.mi_flow.csv` extension.
        #[arg(long)]
        mi_flow: Option<PathBuf>,
    },
    /// Score a saved model on one partition of the configured dataset.
    Evaluate {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long, value_enum, default_value_t = Partition::Test)]
        on: Partition,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Repeat split, train and evaluate `runs` times and average.
    Experiment {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        metrics: Option<PathBuf>,
    },
    /// Write the information flow of a saved model as CSV.
    Inspect {
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 0)]
        run: usize,
        #[arg(long, value_enum, default_value_t = Partition::Train)]
        on: Partition,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Download the kidney disease ARFF file and record or verify its SHA-256.
    FetchData {
        #[arg(long, default_value = "data")]
        dest: PathBuf,
        #[arg(long, default_value = CKD_URL)]
        url: String,
        /// Use a local copy of the zip archive instead of downloading.
        #[arg(long)]
        archive: Option<PathBuf>,
        /// Expected SHA-256 of the extracted file.
        #[arg(long)]
        sha256: Option<String>,
    },
}

fn progress(event: serde_json::Value) {
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "{event}");
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format(|buf, record| {
            let line = json!({
                "event": "log",
                "level": record.level().to_string().to_lowercase(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .init();
}

fn write_json(value: &impl serde::Serialize, path: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Serde(e.to_string()))?;
    if let Some(path) = path {
        create_parent(path)?;
        fs::write(path, format!("{text}\n")).map_err(|e| io_error(path, e))?;
    }
    println!("{text}");
    Ok(())
}

fn io_error(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create_parent(path: &Path) -> Result<(), Error> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| io_error(dir, e)),
        _ => Ok(()),
    }
}

fn partition(
    config: &ExperimentConfig,
    data: RawDataset,
    run: usize,
    on: Partition,
) -> Result<RawDataset, Error> {
    Ok(match on {
        Partition::All => data,
        Partition::Train => split_for_run(config, &data, run)?.0,
        Partition::Test => split_for_run(config, &data, run)?.1,
    })
}

fn eval_seed(seeds: RunSeeds, on: Partition) -> u64 {
    match on {
        Partition::Train => seeds.eval_train,
        Partition::Test | Partition::All => seeds.eval_test,
    }
}

fn write_flow_csv(
    model: &din::network::DINModel,
    rows: &RawDataset,
    seed: u64,
    config: &ExperimentConfig,
    path: Option<&Path>,
) -> Result<(), Error> {
    let data = quantize_with_model(model, rows)?;
    let report = mi_flow(model, &data, seed, config.execution)?;
    for v in check_bounds(&report, 1e-6) {
        log::warn!("{v}");
    }
    match path {
        Some(path) => {
            create_parent(path)?;
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            write_mi_flow_csv(&report, BufWriter::new(file))
        }
        None => write_mi_flow_csv(&report, std::io::stdout().lock()),
    }
}

fn cmd_train(
    args: &ConfigArgs,
    run: usize,
    model_path: Option<PathBuf>,
    metrics_path: Option<PathBuf>,
    flow_path: Option<PathBuf>,
) -> Result<(), Error> {
    let config = args.load()?;
    let data = config.dataset.load()?;
    progress(json!({"event": "loaded", "rows": data.n_rows(), "features": data.n_features()}));
    let seeds = RunSeeds::derive(config.seed, run);
    let (train, _) = split_for_run(&config, &data, run)?;
    let model = train_model(&config, &train, seeds.train, config.execution)?;
    progress(json!({"event": "trained", "run": run, "nodes": model.topology.n_nodes()}));

    let model_path = model_path
        .or_else(|| config.outputs.model.clone())
        .unwrap_or_else(|| PathBuf::from("model.json"));
    create_parent(&model_path)?;
    save_model(&model, &model_path)?;
    progress(json!({"event": "saved", "model": model_path}));

    let flow_path = flow_path
        .or_else(|| config.outputs.mi_flow.clone())
        .unwrap_or_else(|| model_path.with_extension("mi_flow.csv"));
    write_flow_csv(&model, &train, seeds.train, &config, Some(&flow_path))?;
    progress(json!({"event": "saved", "mi_flow": flow_path}));

    let positive = data.class_names[config.dataset.positive_index(&data)?].clone();
    let metrics = evaluate(
        &model,
        &train,
        &positive,
        config.prediction.with_seed(seeds.eval_train),
        config.execution,
    )?;
    let report = MetricsReport {
        runs: 1,
        positive_class: positive,
        train: PhaseReport::from_runs(vec![metrics])?,
        test: None,
    };
    write_json(&report, metrics_path.or(config.outputs.metrics).as_deref())
}

fn cmd_evaluate(
    args: &ConfigArgs,
    model_path: &Path,
    run: usize,
    on: Partition,
    metrics_path: Option<PathBuf>,
) -> Result<(), Error> {
    let config = args.load()?;
    let model = load_model(model_path)?;
    let data = config.dataset.load()?;
    let positive = data.class_names[config.dataset.positive_index(&data)?].clone();
    let rows = partition(&config, data, run, on)?;
    let seed = eval_seed(RunSeeds::derive(config.seed, run), on);
    let metrics = evaluate(
        &model,
        &rows,
        &positive,
        config.prediction.with_seed(seed),
        config.execution,
    )?;
    let on_name = on.to_possible_value().expect("named").get_name().to_string();
    let report = json!({
        "run": run,
        "partition": on_name,
        "rows": rows.n_rows(),
        "positive_class": positive,
        "metrics": metrics,
    });
    write_json(&report, metrics_path.as_deref())
}

fn cmd_experiment(
    args: &ConfigArgs,
    runs: Option<usize>,
    workers: Option<usize>,
    metrics_path: Option<PathBuf>,
) -> Result<(), Error> {
    let mut config = args.load()?;
    if let Some(r) = runs {
        config.runs = r;
    }
    if let Some(w) = workers {
        config.workers = w;
    }
    config.validate()?;
    let data = config.dataset.load()?;
    progress(
        json!({"event": "loaded", "rows": data.n_rows(), "features": data.n_features(), "runs": config.runs}),
    );
    let report = run_experiment(&config, &data, |r| {
        progress(json!({"event": "run", "run": r.run, "train": r.train, "test": r.test}));
    })?;
    write_json(&report, metrics_path.or(config.outputs.metrics).as_deref())
}

fn cmd_inspect(
    args: &ConfigArgs,
    model_path: &Path,
    run: usize,
    on: Partition,
    output: Option<PathBuf>,
) -> Result<(), Error> {
    let config = args.load()?;
    let model = load_model(model_path)?;
    let data = config.dataset.load()?;
    let rows = partition(&config, data, run, on)?;
    let seed = RunSeeds::derive(config.seed, run).train;
    write_flow_csv(&model, &rows, seed, &config, output.as_deref())
}

fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn cmd_fetch(
    dest: &Path,
    url: &str,
    archive: Option<PathBuf>,
    expected: Option<String>,
) -> Result<(), Error> {
    fs::create_dir_all(dest).map_err(|e| io_error(dest, e))?;
    let archive_path = match archive {
        Some(p) => p,
        None => {
            let target = dest.join("chronic_kidney_disease.zip");
            progress(json!({"event": "download", "url": url}));
            let status = Command::new("curl")
                .args(["-fsSL", "--retry", "2", "-o"])
                .arg(&target)
                .arg(url)
                .status()
                .map_err(|e| Error::Config(format!("cannot run curl: {e}")))?;
            if !status.success() {
                return Err(Error::Validation(format!("download of {url} failed ({status})")));
            }
            target
        }
    };
    let file = File::open(&archive_path).map_err(|e| io_error(&archive_path, e))?;
    let mut zip = zip::ZipArchive::new(file)
        .map_err(|e| Error::Validation(format!("{}: {e}", archive_path.display())))?;
    let member = (0..zip.len())
        .find(|&i| {
            zip.by_index(i)
                .map(|f| f.name().rsplit('/').next() == Some(CKD_MEMBER))
                .unwrap_or(false)
        })
        .ok_or_else(|| Error::Validation(format!("{} has no {CKD_MEMBER}", archive_path.display())))?;
    let mut bytes = Vec::new();
    zip.by_index(member)
        .and_then(|mut f| f.read_to_end(&mut bytes).map_err(Into::into))
        .map_err(|e| Error::Validation(format!("{}: {e}", archive_path.display())))?;
    let digest = sha256_hex(&bytes);

    let out = dest.join(CKD_MEMBER);
    let sidecar = dest.join(format!("{CKD_MEMBER}.sha256"));
    let pinned = match expected {
        Some(h) => Some(h.trim().to_ascii_lowercase()),
        None => fs::read_to_string(&sidecar)
            .ok()
            .and_then(|s| s.split_whitespace().next().map(str::to_ascii_lowercase)),
    };
    if let Some(pinned) = &pinned {
        if *pinned != digest {
            return Err(Error::Checksum(format!(
                "{CKD_MEMBER}: expected sha256 {pinned}, got {digest}"
            )));
        }
    }
    fs::write(&out, &bytes).map_err(|e| io_error(&out, e))?;
    fs::write(&sidecar, format!("{digest}  {CKD_MEMBER}\n")).map_err(|e| io_error(&sidecar, e))?;
    write_json(
        &json!({
            "path": out,
            "sha256": digest,
            "verified": pinned.is_some(),
            "bytes": bytes.len(),
        }),
        None,
    )
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::Validation(_) => "validation",
        Error::Dimension { .. } => "dimension",
        Error::Config(_) => "config",
        Error::Schema(_) => "schema",
        Error::Parse { .. } => "parse",
        Error::Io { .. } => "io",
        Error::StateSpace { .. } => "state_space",
        Error::Version { .. } => "version",
        Error::Checksum(_) => "checksum",
        Error::Serde(_) => "serde",
        Error::Run { source, .. } => error_kind(source),
    }
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match cli.command {
        Cmd::Train {
            config,
            run,
            model,
            metrics,
            mi_flow,
        } => cmd_train(&config, run, model, metrics, mi_flow),
        Cmd::Evaluate {
            config,
            model,
            run,
            on,
            metrics,
        } => cmd_evaluate(&config, &model, run, on, metrics),
        Cmd::Experiment {
            config,
            runs,
            workers,
            metrics,
        } => cmd_experiment(&config, runs, workers, metrics),
        Cmd::Inspect {
            config,
            model,
            run,
            on,
            output,
        } => cmd_inspect(&config, &model, run, on, output),
        Cmd::FetchData {
            dest,
            url,
            archive,
            sha256,
        } => cmd_fetch(&dest, &url, archive, sha256),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let run = match &e {
                Error::Run { run, .. } => Some(*run),
                _ => None,
            };
            progress(json!({"error": {"kind": error_kind(&e), "run": run, "message": e.to_string()}}));
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
