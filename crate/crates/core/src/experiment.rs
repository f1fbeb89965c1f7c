//! Declarative experiment configuration and the repeated split → train →
//! evaluate runner.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataio::{
    default_ckd_path, load_dataset, split, synthetic_ckd, DataFormat, LoadOptions, RawDataset, SplitSpec,
    Stratify, SyntheticOptions, DEFAULT_MISSING_TOKENS,
};
use crate::error::{Error, Result};
use crate::exec::{with_workers, Execution};
use crate::ib_solver::SolverOptions;
use crate::metrics::{Metrics, MetricsReport, PhaseReport};
use crate::network::{
    build_topology, layer_widths, predict, train_network, DINModel, PredictMode, TrainConfig,
};
use crate::quantizer::{fit_dataset, quantize_dataset, QuantizerConfig};
use crate::rng::{derive_seed, TAG_EVAL_TEST, TAG_EVAL_TRAIN, TAG_RUN, TAG_SPLIT, TAG_TRAIN};

fn default_target() -> String {
    "class".into()
}

fn default_missing_tokens() -> Vec<String> {
    DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect()
}

/// Where the rows come from: a CSV/ARFF file, or the built-in synthetic
/// generator when `synthetic` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    pub format: Option<DataFormat>,
    pub target: String,
    pub missing_tokens: Vec<String>,
    pub delimiter: char,
    /// Class counted as positive by the metrics and by balanced splits.
    /// Defaults to the first declared class.
    pub positive_class: Option<String>,
    pub synthetic: Option<SyntheticOptions>,
    pub synthetic_seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            path: default_ckd_path(),
            format: None,
            target: default_target(),
            missing_tokens: default_missing_tokens(),
            delimiter: ',',
            positive_class: None,
            synthetic: None,
            synthetic_seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn load(&self) -> Result<RawDataset> {
        if let Some(options) = &self.synthetic {
            return synthetic_ckd(options, self.synthetic_seed);
        }
        let format = match self.format {
            Some(f) => f,
            None => DataFormat::from_path(&self.path).ok_or_else(|| {
                Error::Config(format!(
                    "cannot infer the format of {}; set dataset.format",
                    self.path.display()
                ))
            })?,
        };
        if !self.delimiter.is_ascii() {
            return Err(Error::Config(format!(
                "delimiter {:?} is not ASCII",
                self.delimiter
            )));
        }
        let options = LoadOptions {
            target: self.target.clone(),
            missing_tokens: self.missing_tokens.clone(),
            delimiter: self.delimiter as u8,
        };
        load_dataset(&self.path, format, &options)
    }

    pub fn positive_index(&self, data: &RawDataset) -> Result<usize> {
        match &self.positive_class {
            Some(name) => data.class_index(name),
            None => Ok(0),
        }
    }
}

/// Output cardinality of every non-final layer: one value for all, or one
/// per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NOut {
    Uniform(usize),
    PerLayer(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeOverride {
    pub layer: usize,
    pub position: usize,
    pub n_out: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkConfig {
    pub n_out: NOut,
    pub beta: f64,
    pub solver: SolverOptions,
    #[serde(rename = "node")]
    pub nodes: Vec<NodeOverride>,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self {
            n_out: NOut::Uniform(3),
            beta: 5.0,
            solver: SolverOptions::default(),
            nodes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub n_train: usize,
    pub n_test: Option<usize>,
    pub stratify: Stratify,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            n_train: 200,
            n_test: None,
            stratify: Stratify::Balanced {
                positive_fraction: 0.5,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictionConfig {
    #[default]
    Stochastic,
    Ensemble {
        repeats: usize,
    },
}

impl PredictionConfig {
    pub fn with_seed(self, seed: u64) -> PredictMode {
        match self {
            PredictionConfig::Stochastic => PredictMode::Stochastic { seed },
            PredictionConfig::Ensemble { repeats } => PredictMode::Ensemble { seed, repeats },
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub model: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub mi_flow: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub quantizer: QuantizerConfig,
    pub network: NetworkConfig,
    pub split: SplitConfig,
    pub prediction: PredictionConfig,
    pub runs: usize,
    pub seed: u64,
    /// Worker threads for concurrent runs; 0 uses every core.
    pub workers: usize,
    pub execution: Execution,
    pub outputs: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetConfig::default(),
            quantizer: QuantizerConfig::default(),
            network: NetworkConfig::default(),
            split: SplitConfig::default(),
            prediction: PredictionConfig::default(),
            runs: 1000,
            seed: 0,
            workers: 0,
            execution: Execution::default(),
            outputs: OutputConfig::default(),
        }
    }
}

fn parse_override_value(text: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {text}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(text.to_string()))
}

fn set_path(table: &mut toml::Table, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut current = table;
    while let Some(part) = parts.next() {
        if part.is_empty() {
            return Err(Error::Config(format!("malformed override key '{key}'")));
        }
        if parts.peek().is_none() {
            current.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = current
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        current = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{part}' is not a table")))?;
    }
    Ok(())
}

impl ExperimentConfig {
    /// Parses TOML text, then applies `key.path=value` overrides (values
    /// are TOML literals; bare words are taken as strings).
    pub fn from_toml(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        for o in overrides {
            let (key, value) = o
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("override '{o}' is not key=value")))?;
            set_path(&mut table, key.trim(), parse_override_value(value.trim()))?;
        }
        let config: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_file(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, overrides).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let net = &self.network;
        if !(net.beta.is_finite() && net.beta > 0.0) {
            return bad(format!("network.beta must be positive, got {}", net.beta));
        }
        if !(net.solver.tol.is_finite() && net.solver.tol > 0.0) || net.solver.max_iter == 0 {
            return bad("network.solver needs tol > 0 and max_iter ≥ 1".into());
        }
        let n_outs: &[usize] = match &net.n_out {
            NOut::Uniform(n) => std::slice::from_ref(n),
            NOut::PerLayer(v) => v,
        };
        if n_outs.is_empty() || n_outs.contains(&0) || net.nodes.iter().any(|o| o.n_out == 0) {
            return bad("network.n_out values must be positive".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.split.n_train == 0 {
            return bad("split.n_train must be at least 1".into());
        }
        if let Stratify::Balanced { positive_fraction } = self.split.stratify {
            if !(0.0..=1.0).contains(&positive_fraction) {
                return bad(format!(
                    "split.stratify.positive_fraction {positive_fraction} outside [0, 1]"
                ));
            }
        }
        if let PredictionConfig::Ensemble { repeats: 0 } = self.prediction {
            return bad("prediction.repeats must be at least 1".into());
        }
        if self.quantizer.default_levels < 2 {
            return bad("quantizer.default_levels must be at least 2".into());
        }
        if let Some(s) = &self.dataset.synthetic {
            if !(0.0..=1.0).contains(&s.positive_fraction) || !(0.0..=1.0).contains(&s.missing_rate) {
                return bad("dataset.synthetic fractions must lie in [0, 1]".into());
            }
        }
        Ok(())
    }

    /// `n_out` for each non-final layer of a `d`-feature network.
    pub fn layer_n_out(&self, d: usize) -> Vec<usize> {
        let depth = layer_widths(d).len() - 1;
        match &self.network.n_out {
            NOut::Uniform(n) => vec![*n; depth],
            NOut::PerLayer(v) => v.clone(),
        }
    }
}

/// Seeds of one experiment run, all derived from `(master seed, run)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSeeds {
    pub split: u64,
    pub train: u64,
    pub eval_train: u64,
    pub eval_test: u64,
}

impl RunSeeds {
    pub fn derive(master: u64, run: usize) -> Self {
        let run_seed = derive_seed(master, &[TAG_RUN, run as u64]);
        Self {
            split: derive_seed(run_seed, &[TAG_SPLIT]),
            train: derive_seed(run_seed, &[TAG_TRAIN]),
            eval_train: derive_seed(run_seed, &[TAG_EVAL_TRAIN]),
            eval_test: derive_seed(run_seed, &[TAG_EVAL_TEST]),
        }
    }
}

/// Train/test partition of run `run`.
pub fn split_for_run(
    config: &ExperimentConfig,
    data: &RawDataset,
    run: usize,
) -> Result<(RawDataset, RawDataset)> {
    let spec = SplitSpec {
        n_train: config.split.n_train,
        n_test: config.split.n_test,
        stratify: config.split.stratify,
        positive_class: config.dataset.positive_index(data)?,
    };
    split(data, &spec, RunSeeds::derive(config.seed, run).split)
}

/// Fits the quantizers on `train`, builds the topology and trains it.
pub fn train_model(
    config: &ExperimentConfig,
    train: &RawDataset,
    seed: u64,
    execution: Execution,
) -> Result<DINModel> {
    let specs = fit_dataset(train, &config.quantizer)?;
    let data = quantize_dataset(train, &specs)?;
    let layer_n_out = config.layer_n_out(data.n_features());
    let mut topology = build_topology(data.n_features(), &layer_n_out, data.n_class, &data.cardinalities)?;
    for o in &config.network.nodes {
        topology = topology.with_node_n_out(o.layer, o.position, o.n_out)?;
    }
    let train_config = TrainConfig {
        beta: config.network.beta,
        solver: config.network.solver,
        seed,
        execution,
    };
    train_network(&data, &topology, &train_config)
}

/// Scores `model` on `data`; class names are matched between the two.
pub fn evaluate(
    model: &DINModel,
    data: &RawDataset,
    positive: &str,
    mode: PredictMode,
    execution: Execution,
) -> Result<Metrics> {
    let predicted = predict(model, data, mode, execution)?;
    let positive_idx = model
        .class_names
        .iter()
        .position(|c| c == positive)
        .ok_or_else(|| Error::Schema(format!("model has no class '{positive}'")))?;
    let model_index: BTreeMap<&str, usize> = model
        .class_names
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let truth = data
        .target
        .iter()
        .map(|t| {
            model_index
                .get(t.as_str())
                .copied()
                .ok_or_else(|| Error::Schema(format!("class '{t}' unknown to the model")))
        })
        .collect::<Result<Vec<_>>>()?;
    Metrics::compute(&truth, &predicted, positive_idx)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run: usize,
    pub train: Metrics,
    pub test: Metrics,
}

/// One full split → train → evaluate cycle.
pub fn run_once(
    config: &ExperimentConfig,
    data: &RawDataset,
    run: usize,
    execution: Execution,
) -> Result<RunResult> {
    let seeds = RunSeeds::derive(config.seed, run);
    let (train, test) = split_for_run(config, data, run)?;
    let positive = data.class_names[config.dataset.positive_index(data)?].clone();
    let model = train_model(config, &train, seeds.train, execution)?;
    let mode = |s| config.prediction.with_seed(s);
    Ok(RunResult {
        run,
        train: evaluate(&model, &train, &positive, mode(seeds.eval_train), execution)?,
        test: evaluate(&model, &test, &positive, mode(seeds.eval_test), execution)?,
    })
}

/// Runs `config.runs` independent repetitions on up to `config.workers`
/// threads. `on_run` sees each finished run (in completion order); the
/// report is assembled in run order, so it does not depend on scheduling.
pub fn run_experiment<F>(config: &ExperimentConfig, data: &RawDataset, on_run: F) -> Result<MetricsReport>
where
    F: Fn(&RunResult) + Sync + Send,
{
    config.validate()?;
    let execution = config.execution;
    // parallelism goes to the runs; each run is then trained sequentially
    let inner = if config.runs > 1 {
        Execution::Sequential
    } else {
        execution
    };
    let results = with_workers(config.workers, || {
        execution.try_map(config.runs, |r| {
            let result = run_once(config, data, r, inner).map_err(|e| Error::Run {
                run: r,
                source: Box::new(e),
            })?;
            on_run(&result);
            Ok::<_, Error>(result)
        })
    })?;
    let (train, test): (Vec<Metrics>, Vec<Metrics>) = results.into_iter().map(|r| (r.train, r.test)).unzip();
    Ok(MetricsReport {
        runs: config.runs,
        positive_class: data.class_names[config.dataset.positive_index(data)?].clone(),
        train: PhaseReport::from_runs(train)?,
        test: Some(PhaseReport::from_runs(test)?),
    })
}
