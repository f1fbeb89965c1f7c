//! Dataset ingestion (CSV, ARFF), seeded train/test splits, a synthetic
//! CKD-like generator, and model persistence.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::network::DINModel;
use crate::rng::{stream, TAG_SPLIT};

/// Tokens treated as missing when none are configured.
pub const DEFAULT_MISSING_TOKENS: &[&str] = &["?", ""];

#[derive(Debug, Clone, PartialEq)]
pub enum RawValue {
    Missing,
    Number(f64),
    Text(String),
}

impl RawValue {
    pub fn is_missing(&self) -> bool {
        matches!(self, RawValue::Missing)
    }

    /// Parses a cell: missing token, then number, then text.
    pub fn parse(cell: &str, missing_tokens: &[String]) -> Self {
        let t = cell.trim().trim_matches(|c| c == '\'' || c == '"').trim();
        if missing_tokens.iter().any(|m| m == t) {
            return RawValue::Missing;
        }
        match t.parse::<f64>() {
            Ok(x) if x.is_finite() => RawValue::Number(x),
            _ => RawValue::Text(t.to_string()),
        }
    }

    fn label(&self) -> Option<String> {
        match self {
            RawValue::Missing => None,
            RawValue::Number(x) => Some(format!("{x}")),
            RawValue::Text(s) => Some(s.clone()),
        }
    }
}

impl fmt::Display for RawValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RawValue::Missing => write!(f, "?"),
            RawValue::Number(x) => write!(f, "{x}"),
            RawValue::Text(s) => write!(f, "{s}"),
        }
    }
}

/// Column-major raw table with a separate target column.
#[derive(Debug, Clone, PartialEq)]
pub struct RawDataset {
    pub feature_names: Vec<String>,
    pub features: Vec<Vec<RawValue>>,
    /// Declared category lists (ARFF nominal attributes), per feature.
    pub nominal: Vec<Option<Vec<String>>>,
    pub target_name: String,
    pub target: Vec<String>,
    /// Class names in declaration or first-appearance order.
    pub class_names: Vec<String>,
}

impl RawDataset {
    fn new(
        names: Vec<String>,
        mut columns: Vec<Vec<RawValue>>,
        mut nominal: Vec<Option<Vec<String>>>,
        target_name: &str,
        path: &Path,
    ) -> Result<Self> {
        let ti = names.iter().position(|n| n == target_name).ok_or_else(|| {
            Error::Schema(format!(
                "target column '{target_name}' not found in {} (columns: {})",
                path.display(),
                names.join(", ")
            ))
        })?;
        let target_col = columns.remove(ti);
        let declared = nominal.remove(ti);
        let mut feature_names = names;
        feature_names.remove(ti);

        let keep: Vec<usize> = (0..target_col.len())
            .filter(|&r| !target_col[r].is_missing())
            .collect();
        if keep.len() < target_col.len() {
            log::warn!(
                "{}: dropping {} rows with missing target",
                path.display(),
                target_col.len() - keep.len()
            );
            for col in &mut columns {
                *col = keep.iter().map(|&r| col[r].clone()).collect();
            }
        }
        let target: Vec<String> = keep.iter().filter_map(|&r| target_col[r].label()).collect();
        let mut class_names = declared.unwrap_or_default();
        for t in &target {
            if !class_names.contains(t) {
                class_names.push(t.clone());
            }
        }
        Ok(Self {
            feature_names,
            features: columns,
            nominal,
            target_name: target_name.to_string(),
            target,
            class_names,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Class index per row, relative to `class_names`.
    pub fn labels(&self) -> Vec<usize> {
        let index: HashMap<&str, usize> = self
            .class_names
            .iter()
            .enumerate()
            .map(|(i, c)| (c.as_str(), i))
            .collect();
        self.target.iter().map(|t| index[t.as_str()]).collect()
    }

    pub fn class_index(&self, name: &str) -> Result<usize> {
        self.class_names.iter().position(|c| c == name).ok_or_else(|| {
            Error::Config(format!(
                "class '{name}' not present (classes: {})",
                self.class_names.join(", ")
            ))
        })
    }

    /// Rows in the given order; class list is preserved.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            feature_names: self.feature_names.clone(),
            features: self
                .features
                .iter()
                .map(|c| rows.iter().map(|&r| c[r].clone()).collect())
                .collect(),
            nominal: self.nominal.clone(),
            target_name: self.target_name.clone(),
            target: rows.iter().map(|&r| self.target[r].clone()).collect(),
            class_names: self.class_names.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataFormat {
    Csv,
    Arff,
}

impl DataFormat {
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" | "txt" => Some(DataFormat::Csv),
            "arff" => Some(DataFormat::Arff),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub target: String,
    pub missing_tokens: Vec<String>,
    pub delimiter: u8,
}

impl LoadOptions {
    pub fn new(target: impl Into<String>) -> Self {
        Self {
            target: target.into(),
            missing_tokens: DEFAULT_MISSING_TOKENS.iter().map(|s| s.to_string()).collect(),
            delimiter: b',',
        }
    }
}

pub fn load_dataset(path: &Path, format: DataFormat, options: &LoadOptions) -> Result<RawDataset> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    match format {
        DataFormat::Csv => parse_csv(&text, path, options),
        DataFormat::Arff => parse_arff(&text, path, options),
    }
}

fn parse_csv(text: &str, path: &Path, options: &LoadOptions) -> Result<RawDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(options.delimiter)
        .has_headers(true)
        .from_reader(text.as_bytes());
    let parse_err = |e: csv::Error| {
        let (line, column) = match e.kind() {
            csv::ErrorKind::UnequalLengths {
                pos,
                expected_len,
                len,
            } => (
                pos.as_ref().map_or(0, |p| p.line() as usize),
                (*len.min(expected_len)) as usize + 1,
            ),
            _ => (e.position().map_or(0, |p| p.line() as usize), 0),
        };
        Error::Parse {
            path: path.to_path_buf(),
            line,
            column,
            message: e.to_string(),
        }
    };
    let names: Vec<String> = reader
        .headers()
        .map_err(parse_err)?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let mut columns: Vec<Vec<RawValue>> = vec![Vec::new(); names.len()];
    for record in reader.records() {
        let record = record.map_err(parse_err)?;
        for (col, cell) in columns.iter_mut().zip(record.iter()) {
            col.push(RawValue::parse(cell, &options.missing_tokens));
        }
    }
    let nominal = vec![None; names.len()];
    RawDataset::new(names, columns, nominal, &options.target, path)
}

#[derive(Debug, Clone)]
enum ArffType {
    Numeric,
    Nominal(Vec<String>),
    Text,
}

fn unquote(s: &str) -> &str {
    s.trim().trim_matches(|c| c == '\'' || c == '"').trim()
}

fn parse_arff(text: &str, path: &Path, options: &LoadOptions) -> Result<RawDataset> {
    let perr = |line: usize, column: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        column,
        message,
    };
    let mut names = Vec::new();
    let mut types = Vec::new();
    let mut columns: Vec<Vec<RawValue>> = Vec::new();
    let mut in_data = false;

    for (ln, raw_line) in text.lines().enumerate() {
        let line_no = ln + 1;
        let line = raw_line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        if !in_data {
            let lower = line.to_ascii_lowercase();
            if lower.starts_with("@relation") {
                continue;
            }
            if lower.starts_with("@data") {
                if names.is_empty() {
                    return Err(perr(line_no, 1, "@data before any @attribute".into()));
                }
                columns = vec![Vec::new(); names.len()];
                in_data = true;
                continue;
            }
            if lower.starts_with("@attribute") {
                let rest = line["@attribute".len()..].trim();
                let (name, ty) = if let Some(stripped) = rest.strip_prefix('\'') {
                    let end = stripped
                        .find('\'')
                        .ok_or_else(|| perr(line_no, 12, "unterminated attribute name".into()))?;
                    (&stripped[..end], stripped[end + 1..].trim())
                } else {
                    rest.split_once(char::is_whitespace)
                        .map(|(n, t)| (n, t.trim()))
                        .ok_or_else(|| perr(line_no, 12, "attribute without a type".into()))?
                };
                let ty = if ty.starts_with('{') {
                    let inner = ty
                        .strip_prefix('{')
                        .and_then(|t| t.trim_end().strip_suffix('}'))
                        .ok_or_else(|| perr(line_no, 1, "unterminated nominal list".into()))?;
                    ArffType::Nominal(
                        inner
                            .split(',')
                            .map(unquote)
                            .filter(|s| !s.is_empty())
                            .map(str::to_string)
                            .collect(),
                    )
                } else {
                    match ty.to_ascii_lowercase().as_str() {
                        "numeric" | "real" | "integer" => ArffType::Numeric,
                        "string" => ArffType::Text,
                        other => {
                            return Err(perr(line_no, 1, format!("unsupported attribute type '{other}'")))
                        }
                    }
                };
                names.push(name.to_string());
                types.push(ty);
                continue;
            }
            return Err(perr(line_no, 1, format!("unexpected header line '{line}'")));
        }

        let mut cells: Vec<&str> = line.split(',').collect();
        // tolerate one stray trailing delimiter
        if cells.len() == names.len() + 1 && cells.last().is_some_and(|c| c.trim().is_empty()) {
            cells.pop();
        }
        if cells.len() != names.len() {
            return Err(perr(
                line_no,
                cells.len().min(names.len()) + 1,
                format!("expected {} values, found {}", names.len(), cells.len()),
            ));
        }
        for (k, cell) in cells.iter().enumerate() {
            let v = RawValue::parse(cell, &options.missing_tokens);
            let v = match (&types[k], v) {
                (ArffType::Numeric, RawValue::Text(t)) => {
                    log::warn!(
                        "{}:{line_no}: non-numeric value '{t}' for numeric attribute '{}' treated as missing",
                        path.display(),
                        names[k]
                    );
                    RawValue::Missing
                }
                (_, v) => v,
            };
            columns[k].push(v);
        }
    }
    if !in_data {
        return Err(perr(text.lines().count(), 1, "no @data section".into()));
    }
    let nominal = types
        .into_iter()
        .map(|t| match t {
            ArffType::Nominal(v) => Some(v),
            _ => None,
        })
        .collect();
    RawDataset::new(names, columns, nominal, &options.target, path)
}

/// Class mix of the training partition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Stratify {
    #[default]
    None,
    /// Draw `round(n_train · positive_fraction)` training rows from the
    /// positive class and the rest from the other classes.
    Balanced { positive_fraction: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitSpec {
    pub n_train: usize,
    /// Defaults to every row not used for training.
    pub n_test: Option<usize>,
    pub stratify: Stratify,
    pub positive_class: usize,
}

/// Row indices of a seeded train/test split.
pub fn split_indices(labels: &[usize], spec: &SplitSpec, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = labels.len();
    if spec.n_train == 0 || spec.n_train >= n {
        return Err(Error::Config(format!(
            "n_train must be in 1..{n} for a dataset of {n} rows, got {}",
            spec.n_train
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, &[TAG_SPLIT]));

    let (train, rest): (Vec<usize>, Vec<usize>) = match spec.stratify {
        Stratify::None => (order[..spec.n_train].to_vec(), order[spec.n_train..].to_vec()),
        Stratify::Balanced { positive_fraction } => {
            if !(0.0..=1.0).contains(&positive_fraction) {
                return Err(Error::Config(format!(
                    "positive_fraction must be in [0, 1], got {positive_fraction}"
                )));
            }
            let want_pos = (spec.n_train as f64 * positive_fraction).round() as usize;
            let want_neg = spec.n_train - want_pos;
            let have_pos = labels.iter().filter(|&&y| y == spec.positive_class).count();
            let have_neg = n - have_pos;
            if want_pos > have_pos || want_neg > have_neg {
                return Err(Error::Config(format!(
                    "cannot draw {want_pos} positive + {want_neg} negative training rows: \
                     only {have_pos} positive and {have_neg} negative available"
                )));
            }
            let (mut pos, mut neg) = (0, 0);
            let mut train = Vec::with_capacity(spec.n_train);
            let mut rest = Vec::with_capacity(n - spec.n_train);
            for &r in &order {
                let is_pos = labels[r] == spec.positive_class;
                if is_pos && pos < want_pos {
                    pos += 1;
                    train.push(r);
                } else if !is_pos && neg < want_neg {
                    neg += 1;
                    train.push(r);
                } else {
                    rest.push(r);
                }
            }
            (train, rest)
        }
    };
    let test = match spec.n_test {
        None => rest,
        Some(k) if k <= rest.len() => rest[..k].to_vec(),
        Some(k) => {
            return Err(Error::Config(format!(
                "n_test = {k} exceeds the {} rows left after training",
                rest.len()
            )))
        }
    };
    Ok((train, test))
}

pub fn split(data: &RawDataset, spec: &SplitSpec, seed: u64) -> Result<(RawDataset, RawDataset)> {
    let (train, test) = split_indices(&data.labels(), spec, seed)?;
    Ok((data.select_rows(&train), data.select_rows(&test)))
}

/// Options for [`synthetic_ckd`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticOptions {
    pub rows: usize,
    pub positive_fraction: f64,
    /// Probability that any non-planted cell is blanked out.
    pub missing_rate: f64,
    /// Class separation of the numeric features, in standard deviations.
    pub separation: f64,
    /// Make albumin a noiseless, never-missing indicator of the class.
    pub separable: bool,
}

impl Default for SyntheticOptions {
    fn default() -> Self {
        Self {
            rows: 400,
            positive_fraction: 0.625,
            missing_rate: 0.08,
            separation: 1.2,
            separable: false,
        }
    }
}

struct NumericFeature {
    name: &'static str,
    healthy: f64,
    sd: f64,
    /// +1 if the disease raises the value, -1 if it lowers it.
    sign: f64,
    decimals: i32,
}

const NUMERIC: &[NumericFeature] = &[
    NumericFeature {
        name: "age",
        healthy: 46.0,
        sd: 15.0,
        sign: 0.5,
        decimals: 0,
    },
    NumericFeature {
        name: "bp",
        healthy: 71.0,
        sd: 9.0,
        sign: 0.6,
        decimals: -1,
    },
    NumericFeature {
        name: "bgr",
        healthy: 107.0,
        sd: 30.0,
        sign: 1.0,
        decimals: 0,
    },
    NumericFeature {
        name: "bu",
        healthy: 32.0,
        sd: 14.0,
        sign: 1.0,
        decimals: 0,
    },
    NumericFeature {
        name: "sc",
        healthy: 0.9,
        sd: 0.6,
        sign: 1.0,
        decimals: 1,
    },
    NumericFeature {
        name: "sod",
        healthy: 141.0,
        sd: 4.5,
        sign: -0.8,
        decimals: 0,
    },
    NumericFeature {
        name: "pot",
        healthy: 4.3,
        sd: 0.6,
        sign: 0.4,
        decimals: 1,
    },
    NumericFeature {
        name: "hemo",
        healthy: 15.2,
        sd: 1.6,
        sign: -1.0,
        decimals: 1,
    },
    NumericFeature {
        name: "pcv",
        healthy: 46.0,
        sd: 4.5,
        sign: -1.0,
        decimals: 0,
    },
    NumericFeature {
        name: "wbcc",
        healthy: 7700.0,
        sd: 1900.0,
        sign: 0.3,
        decimals: -2,
    },
    NumericFeature {
        name: "rbcc",
        healthy: 5.4,
        sd: 0.6,
        sign: -1.0,
        decimals: 1,
    },
];

struct NominalFeature {
    name: &'static str,
    values: &'static [&'static str],
    healthy: &'static [f64],
    ill: &'static [f64],
}

const NOMINAL: &[NominalFeature] = &[
    NominalFeature {
        name: "sg",
        values: &["1.005", "1.010", "1.015", "1.020", "1.025"],
        healthy: &[0.0, 0.02, 0.05, 0.45, 0.48],
        ill: &[0.05, 0.35, 0.35, 0.2, 0.05],
    },
    NominalFeature {
        name: "al",
        values: &["0", "1", "2", "3", "4", "5"],
        healthy: &[0.9, 0.06, 0.02, 0.02, 0.0, 0.0],
        ill: &[0.25, 0.2, 0.2, 0.2, 0.12, 0.03],
    },
    NominalFeature {
        name: "su",
        values: &["0", "1", "2", "3", "4", "5"],
        healthy: &[0.96, 0.02, 0.01, 0.01, 0.0, 0.0],
        ill: &[0.7, 0.08, 0.08, 0.07, 0.05, 0.02],
    },
    NominalFeature {
        name: "rbc",
        values: &["normal", "abnormal"],
        healthy: &[0.97, 0.03],
        ill: &[0.7, 0.3],
    },
    NominalFeature {
        name: "pc",
        values: &["normal", "abnormal"],
        healthy: &[0.95, 0.05],
        ill: &[0.6, 0.4],
    },
    NominalFeature {
        name: "pcc",
        values: &["present", "notpresent"],
        healthy: &[0.02, 0.98],
        ill: &[0.17, 0.83],
    },
    NominalFeature {
        name: "ba",
        values: &["present", "notpresent"],
        healthy: &[0.02, 0.98],
        ill: &[0.09, 0.91],
    },
    NominalFeature {
        name: "htn",
        values: &["yes", "no"],
        healthy: &[0.03, 0.97],
        ill: &[0.58, 0.42],
    },
    NominalFeature {
        name: "dm",
        values: &["yes", "no"],
        healthy: &[0.02, 0.98],
        ill: &[0.54, 0.46],
    },
    NominalFeature {
        name: "cad",
        values: &["yes", "no"],
        healthy: &[0.01, 0.99],
        ill: &[0.14, 0.86],
    },
    NominalFeature {
        name: "appet",
        values: &["good", "poor"],
        healthy: &[0.99, 0.01],
        ill: &[0.67, 0.33],
    },
    NominalFeature {
        name: "pe",
        values: &["yes", "no"],
        healthy: &[0.01, 0.99],
        ill: &[0.3, 0.7],
    },
    NominalFeature {
        name: "ane",
        values: &["yes", "no"],
        healthy: &[0.01, 0.99],
        ill: &[0.24, 0.76],
    },
];

/// Names of the 24 CKD features in file order.
pub const CKD_FEATURES: [&str; 24] = [
    "age", "bp", "sg", "al", "su", "rbc", "pc", "pcc", "ba", "bgr", "bu", "sc", "sod", "pot", "hemo", "pcv",
    "wbcc", "rbcc", "htn", "dm", "cad", "appet", "pe", "ane",
];

fn draw_categorical(rng: &mut impl Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Generates a CKD-shaped table: the same 24 mixed-type features and
/// `ckd`/`notckd` classes, with class-dependent distributions and random
/// missing cells.
pub fn synthetic_ckd(options: &SyntheticOptions, seed: u64) -> Result<RawDataset> {
    if options.rows < 2 {
        return Err(Error::Config("synthetic data needs at least 2 rows".into()));
    }
    let mut rng = stream(seed, &[0x5EED]);
    let n_pos = (options.rows as f64 * options.positive_fraction).round() as usize;
    let mut ill: Vec<bool> = (0..options.rows).map(|r| r < n_pos).collect();
    ill.shuffle(&mut rng);

    let numeric: HashMap<&str, &NumericFeature> = NUMERIC.iter().map(|f| (f.name, f)).collect();
    let nominal: HashMap<&str, &NominalFeature> = NOMINAL.iter().map(|f| (f.name, f)).collect();
    let mut columns = Vec::with_capacity(CKD_FEATURES.len());
    let mut declared = Vec::with_capacity(CKD_FEATURES.len() + 1);
    for name in CKD_FEATURES {
        let planted = options.separable && name == "al";
        let mut col = Vec::with_capacity(options.rows);
        if let Some(f) = numeric.get(name) {
            let normal = Normal::new(0.0, f.sd).expect("positive sd");
            let scale = 10f64.powi(f.decimals);
            for &is_ill in &ill {
                let shift = if is_ill {
                    f.sign * options.separation * f.sd
                } else {
                    0.0
                };
                let x = (f.healthy + shift + normal.sample(&mut rng)).max(0.0);
                col.push(RawValue::Number((x * scale).round() / scale));
            }
            declared.push(None);
        } else {
            let f = nominal[name];
            for &is_ill in &ill {
                let k = if planted {
                    if is_ill {
                        1 + rng.gen_range(0..f.values.len() - 1)
                    } else {
                        0
                    }
                } else {
                    draw_categorical(&mut rng, if is_ill { f.ill } else { f.healthy })
                };
                col.push(RawValue::parse(f.values[k], &[]));
            }
            declared.push(Some(f.values.iter().map(|s| s.to_string()).collect()));
        }
        if !planted {
            for v in &mut col {
                if rng.gen::<f64>() < options.missing_rate {
                    *v = RawValue::Missing;
                }
            }
        }
        columns.push(col);
    }
    let class_names = vec!["ckd".to_string(), "notckd".to_string()];
    declared.push(Some(class_names.clone()));
    columns.push(
        ill.iter()
            .map(|&b| RawValue::Text(if b { "ckd" } else { "notckd" }.into()))
            .collect(),
    );
    let mut names: Vec<String> = CKD_FEATURES.iter().map(|s| s.to_string()).collect();
    names.push("class".into());
    RawDataset::new(names, columns, declared, "class", Path::new("<synthetic>"))
}

/// Current model file format version.
pub const MODEL_FORMAT_VERSION: u64 = 1;
const MODEL_FORMAT_NAME: &str = "din-model";

#[derive(Serialize, Deserialize)]
struct ModelEnvelope {
    format: String,
    version: u64,
    checksum: String,
    model: serde_json::Value,
}

fn checksum_of(model: &serde_json::Value) -> String {
    // serde_json maps are sorted, so the compact rendering is canonical
    let canonical = serde_json::to_string(model).expect("JSON value renders");
    Sha256::digest(canonical.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Serializes a model to the versioned, checksummed JSON format.
pub fn model_to_json(model: &DINModel) -> Result<String> {
    let value = serde_json::to_value(model).map_err(|e| Error::Serde(e.to_string()))?;
    let envelope = ModelEnvelope {
        format: MODEL_FORMAT_NAME.into(),
        version: MODEL_FORMAT_VERSION,
        checksum: checksum_of(&value),
        model: value,
    };
    serde_json::to_string_pretty(&envelope).map_err(|e| Error::Serde(e.to_string()))
}

pub fn model_from_json(text: &str) -> Result<DINModel> {
    let envelope: ModelEnvelope = match serde_json::from_str(text) {
        Ok(e) => e,
        Err(e) if e.is_eof() => return Err(Error::Checksum(format!("model file is truncated ({e})"))),
        Err(e) => return Err(Error::Serde(e.to_string())),
    };
    if envelope.format != MODEL_FORMAT_NAME {
        return Err(Error::Serde(format!(
            "not a model file (format '{}')",
            envelope.format
        )));
    }
    if envelope.version > MODEL_FORMAT_VERSION {
        return Err(Error::Version {
            found: envelope.version,
            supported: MODEL_FORMAT_VERSION,
        });
    }
    let actual = checksum_of(&envelope.model);
    if actual != envelope.checksum {
        return Err(Error::Checksum(format!(
            "stored {} but content hashes to {actual}",
            envelope.checksum
        )));
    }
    let model: DINModel = serde_json::from_value(envelope.model).map_err(|e| Error::Serde(e.to_string()))?;
    model.validate()?;
    Ok(model)
}

pub fn save_model(model: &DINModel, path: &Path) -> Result<()> {
    let text = model_to_json(model)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<DINModel> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text)
}

/// Default location of the CKD file fetched by the CLI.
pub fn default_ckd_path() -> PathBuf {
    PathBuf::from("data/chronic_kidney_disease_full.arff")
}
