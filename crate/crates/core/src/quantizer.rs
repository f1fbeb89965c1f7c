//! Per-feature quantization of raw tabular columns into finite alphabets.
//!
//! Continuous features get uniform bins between the training min and max.
//! Categorical features get a dictionary in first-appearance order. Missing
//! values, when present at fit time, get a dedicated trailing symbol.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::dataio::{RawDataset, RawValue};
use crate::error::{Error, Result};

/// Numeric columns with at most this many distinct values are treated as
/// categorical by [`KindHint::Auto`].
pub const DEFAULT_CATEGORICAL_THRESHOLD: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous { min: f64, max: f64, levels: usize },
    Categorical { dictionary: Vec<String> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub name: String,
    pub kind: FeatureKind,
    pub has_missing: bool,
    /// Set when a continuous column was constant at fit time.
    #[serde(default)]
    pub degenerate: bool,
}

/// How to decide a column's kind at fit time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KindHint {
    /// Text columns are categorical; numeric columns are categorical when
    /// they have few distinct values, continuous otherwise.
    #[default]
    Auto,
    Continuous,
    Categorical,
}

/// Dictionary key of a raw value. Numbers use their shortest round-trip
/// form so that `1.0` and `1` agree.
fn category_key(v: &RawValue) -> Option<String> {
    match v {
        RawValue::Missing => None,
        RawValue::Number(x) => Some(format!("{x}")),
        RawValue::Text(s) => Some(match s.trim().parse::<f64>() {
            Ok(x) if x.is_finite() => format!("{x}"),
            _ => s.trim().to_string(),
        }),
    }
}

fn numeric(v: &RawValue) -> Option<f64> {
    match v {
        RawValue::Missing => None,
        RawValue::Number(x) => Some(*x),
        RawValue::Text(s) => s.trim().parse::<f64>().ok().filter(|x| x.is_finite()),
    }
}

impl FeatureSpec {
    fn base_cardinality(&self) -> usize {
        match &self.kind {
            FeatureKind::Continuous { levels, .. } => *levels,
            FeatureKind::Categorical { dictionary } => dictionary.len(),
        }
    }

    /// Number of symbols, including the missing symbol when present.
    pub fn cardinality(&self) -> usize {
        self.base_cardinality() + usize::from(self.has_missing)
    }

    pub fn missing_symbol(&self) -> Option<usize> {
        self.has_missing.then(|| self.base_cardinality())
    }

    /// Identity spec for a column already encoded as `0..card`.
    pub fn identity(name: impl Into<String>, card: usize) -> Self {
        Self {
            name: name.into(),
            kind: FeatureKind::Categorical {
                dictionary: (0..card).map(|i| i.to_string()).collect(),
            },
            has_missing: false,
            degenerate: false,
        }
    }

    fn unseen(&self, what: String) -> Result<usize> {
        self.missing_symbol()
            .ok_or_else(|| Error::Schema(format!("feature '{}': {what} and no missing symbol", self.name)))
    }

    pub fn symbol(&self, value: &RawValue) -> Result<usize> {
        if value.is_missing() {
            return self.unseen("missing value".into());
        }
        match &self.kind {
            FeatureKind::Continuous { min, max, levels } => {
                let Some(x) = numeric(value) else {
                    return self.unseen(format!("non-numeric value {value}"));
                };
                if self.degenerate || *levels <= 1 || max <= min {
                    return Ok(0);
                }
                let width = (max - min) / *levels as f64;
                let bin = ((x - min) / width).floor();
                Ok(bin.clamp(0.0, (*levels - 1) as f64) as usize)
            }
            FeatureKind::Categorical { dictionary } => {
                let key = category_key(value).unwrap_or_default();
                match dictionary.iter().position(|d| *d == key) {
                    Some(s) => Ok(s),
                    None => self.unseen(format!("unseen category '{key}'")),
                }
            }
        }
    }
}

/// Fit a quantizer to one training column.
pub fn fit_quantizer(
    name: &str,
    column: &[RawValue],
    hint: KindHint,
    requested_levels: usize,
) -> Result<FeatureSpec> {
    fit_quantizer_with_threshold(
        name,
        column,
        hint,
        requested_levels,
        DEFAULT_CATEGORICAL_THRESHOLD,
    )
}

pub fn fit_quantizer_with_threshold(
    name: &str,
    column: &[RawValue],
    hint: KindHint,
    requested_levels: usize,
    categorical_threshold: usize,
) -> Result<FeatureSpec> {
    if column.is_empty() {
        return Err(Error::validation(format!("feature '{name}': empty column")));
    }
    let has_missing = column.iter().any(RawValue::is_missing);
    let present: Vec<&RawValue> = column.iter().filter(|v| !v.is_missing()).collect();
    if present.is_empty() {
        return Err(Error::validation(format!(
            "feature '{name}': every value is missing"
        )));
    }
    let numbers: Option<Vec<f64>> = present.iter().map(|v| numeric(v)).collect();

    let continuous = match (hint, &numbers) {
        (KindHint::Categorical, _) => false,
        (KindHint::Continuous, Some(_)) => true,
        (KindHint::Continuous, None) => {
            return Err(Error::Config(format!(
                "feature '{name}' declared continuous but has non-numeric values"
            )))
        }
        (KindHint::Auto, None) => false,
        (KindHint::Auto, Some(xs)) => {
            let mut distinct: Vec<u64> = xs.iter().map(|x| x.to_bits()).collect();
            distinct.sort_unstable();
            distinct.dedup();
            distinct.len() > categorical_threshold
        }
    };

    let (kind, degenerate) = if continuous {
        let xs = numbers.expect("continuous implies numeric");
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max > min {
            if requested_levels < 2 {
                return Err(Error::Config(format!(
                    "feature '{name}': continuous quantization needs at least 2 levels"
                )));
            }
            (
                FeatureKind::Continuous {
                    min,
                    max,
                    levels: requested_levels,
                },
                false,
            )
        } else {
            log::warn!("feature '{name}' is constant ({min}); using a single bin");
            (FeatureKind::Continuous { min, max, levels: 1 }, true)
        }
    } else {
        let mut seen = HashMap::new();
        let mut dictionary = Vec::new();
        for v in &present {
            let key = category_key(v).expect("present values have keys");
            if !seen.contains_key(&key) {
                seen.insert(key.clone(), dictionary.len());
                dictionary.push(key);
            }
        }
        (FeatureKind::Categorical { dictionary }, false)
    };

    Ok(FeatureSpec {
        name: name.to_string(),
        kind,
        has_missing,
        degenerate,
    })
}

/// Map a column through a fitted spec.
pub fn apply_quantizer(spec: &FeatureSpec, column: &[RawValue]) -> Result<Vec<usize>> {
    column.iter().map(|v| spec.symbol(v)).collect()
}

/// Fully quantized table ready for training.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedDataset {
    pub columns: Vec<Vec<usize>>,
    pub cardinalities: Vec<usize>,
    pub labels: Vec<usize>,
    pub n_class: usize,
    pub specs: Vec<FeatureSpec>,
    pub class_names: Vec<String>,
}

impl QuantizedDataset {
    /// Builds a dataset from pre-encoded symbols, with identity specs.
    pub fn from_symbols(
        columns: Vec<Vec<usize>>,
        cardinalities: Vec<usize>,
        labels: Vec<usize>,
        n_class: usize,
    ) -> Result<Self> {
        let specs = cardinalities
            .iter()
            .enumerate()
            .map(|(k, &c)| FeatureSpec::identity(format!("x{k}"), c))
            .collect();
        let class_names = (0..n_class).map(|c| c.to_string()).collect();
        let ds = Self {
            columns,
            cardinalities,
            labels,
            n_class,
            specs,
            class_names,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.labels.len();
        if n == 0 {
            return Err(Error::validation("dataset has no rows"));
        }
        if self.columns.is_empty() {
            return Err(Error::validation("dataset has no feature columns"));
        }
        if self.columns.len() != self.cardinalities.len() || self.columns.len() != self.specs.len() {
            return Err(Error::validation("column, cardinality and spec counts differ"));
        }
        for (k, (col, &card)) in self.columns.iter().zip(&self.cardinalities).enumerate() {
            if col.len() != n {
                return Err(Error::Dimension {
                    what: "column length",
                    expected: n,
                    got: col.len(),
                });
            }
            if let Some(s) = col.iter().find(|&&s| s >= card) {
                return Err(Error::validation(format!(
                    "column {k}: symbol {s} not below cardinality {card}"
                )));
            }
        }
        if let Some(y) = self.labels.iter().find(|&&y| y >= self.n_class) {
            return Err(Error::validation(format!("label {y} not below {}", self.n_class)));
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

/// Per-feature override of the fitted kind and level count.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureOverride {
    pub kind: Option<KindHint>,
    pub levels: Option<usize>,
}

/// Dataset-wide quantization settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizerConfig {
    /// Bins for continuous features without an override.
    pub default_levels: usize,
    pub categorical_threshold: usize,
    /// Give every feature a missing symbol, even when the training rows
    /// have no missing values. Unseen categories at prediction time then
    /// map to it instead of failing.
    pub reserve_missing: bool,
    pub features: BTreeMap<String, FeatureOverride>,
}

impl Default for QuantizerConfig {
    fn default() -> Self {
        Self {
            default_levels: 10,
            categorical_threshold: DEFAULT_CATEGORICAL_THRESHOLD,
            reserve_missing: true,
            features: BTreeMap::new(),
        }
    }
}

/// Fits one spec per feature of `train`. Declared nominal attributes keep
/// their declared category order unless overridden.
pub fn fit_dataset(train: &RawDataset, config: &QuantizerConfig) -> Result<Vec<FeatureSpec>> {
    for name in config.features.keys() {
        if !train.feature_names.contains(name) {
            return Err(Error::Config(format!(
                "quantizer override for unknown feature '{name}'"
            )));
        }
    }
    train
        .feature_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let over = config.features.get(name).cloned().unwrap_or_default();
            let levels = over.levels.unwrap_or(config.default_levels);
            let column = &train.features[k];
            let declared = train.nominal[k].as_ref();
            let mut spec = match (over.kind, declared) {
                (None | Some(KindHint::Categorical), Some(values)) => FeatureSpec {
                    name: name.clone(),
                    kind: FeatureKind::Categorical {
                        dictionary: values
                            .iter()
                            .map(|v| category_key(&RawValue::Text(v.clone())).unwrap_or_default())
                            .collect(),
                    },
                    has_missing: column.iter().any(RawValue::is_missing),
                    degenerate: false,
                },
                (hint, _) => fit_quantizer_with_threshold(
                    name,
                    column,
                    hint.unwrap_or_default(),
                    levels,
                    config.categorical_threshold,
                )?,
            };
            spec.has_missing |= config.reserve_missing;
            Ok(spec)
        })
        .collect()
}

/// Encodes every feature and label of `data` with already fitted specs.
pub fn quantize_dataset(data: &RawDataset, specs: &[FeatureSpec]) -> Result<QuantizedDataset> {
    if specs.len() != data.n_features() {
        return Err(Error::Schema(format!(
            "{} quantizers for {} features",
            specs.len(),
            data.n_features()
        )));
    }
    let columns = specs
        .iter()
        .zip(&data.features)
        .zip(&data.feature_names)
        .map(|((spec, col), name)| {
            if spec.name != *name {
                return Err(Error::Schema(format!(
                    "quantizer '{}' applied to column '{name}'",
                    spec.name
                )));
            }
            apply_quantizer(spec, col)
        })
        .collect::<Result<Vec<_>>>()?;
    let ds = QuantizedDataset {
        columns,
        cardinalities: specs.iter().map(FeatureSpec::cardinality).collect(),
        labels: data.labels(),
        n_class: data.class_names.len(),
        specs: specs.to_vec(),
        class_names: data.class_names.clone(),
    };
    ds.validate()?;
    Ok(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nums(xs: &[f64]) -> Vec<RawValue> {
        xs.iter().map(|&x| RawValue::Number(x)).collect()
    }

    #[test]
    fn uniform_bins() {
        let col = nums(&[0.0, 1.0, 2.0, 3.0]);
        let spec = fit_quantizer("f", &col, KindHint::Continuous, 2).unwrap();
        assert_eq!(
            spec.kind,
            FeatureKind::Continuous {
                min: 0.0,
                max: 3.0,
                levels: 2
            }
        );
        assert_eq!(apply_quantizer(&spec, &col).unwrap(), vec![0, 0, 1, 1]);
        assert_eq!(apply_quantizer(&spec, &nums(&[1.4, 1.6])).unwrap(), vec![0, 1]);
        assert_eq!(apply_quantizer(&spec, &nums(&[-10.0, 99.0])).unwrap(), vec![0, 1]);
        assert_eq!(spec.cardinality(), 2);
        // no missing symbol was fitted
        assert!(spec.symbol(&RawValue::Missing).is_err());
    }

    #[test]
    fn categorical_with_missing() {
        let col = vec![
            RawValue::Text("yes".into()),
            RawValue::Text("no".into()),
            RawValue::Text("yes".into()),
            RawValue::Missing,
        ];
        let spec = fit_quantizer("htn", &col, KindHint::Auto, 10).unwrap();
        assert_eq!(
            spec.kind,
            FeatureKind::Categorical {
                dictionary: vec!["yes".into(), "no".into()]
            }
        );
        assert_eq!(spec.missing_symbol(), Some(2));
        assert_eq!(spec.cardinality(), 3);
        assert_eq!(apply_quantizer(&spec, &col).unwrap(), vec![0, 1, 0, 2]);
        // unseen category goes to the missing symbol
        assert_eq!(spec.symbol(&RawValue::Text("maybe".into())).unwrap(), 2);
    }

    #[test]
    fn unseen_category_without_missing_symbol_names_feature() {
        let col = vec![RawValue::Text("a".into()), RawValue::Text("b".into())];
        let spec = fit_quantizer("pet", &col, KindHint::Auto, 4).unwrap();
        let err = spec.symbol(&RawValue::Text("c".into())).unwrap_err().to_string();
        assert!(err.contains("pet") && err.contains("'c'"), "{err}");
    }

    #[test]
    fn missing_in_continuous_gets_trailing_symbol() {
        let mut col = nums(&(0..40).map(f64::from).collect::<Vec<_>>());
        col.push(RawValue::Missing);
        let spec = fit_quantizer("age", &col, KindHint::Auto, 5).unwrap();
        assert!(matches!(spec.kind, FeatureKind::Continuous { levels: 5, .. }));
        assert_eq!(spec.missing_symbol(), Some(5));
        assert_eq!(spec.symbol(&RawValue::Missing).unwrap(), 5);
    }

    #[test]
    fn auto_hint_uses_distinct_count() {
        let few = nums(&[1.0, 2.0, 3.0, 1.0]);
        let spec = fit_quantizer("al", &few, KindHint::Auto, 8).unwrap();
        assert!(matches!(spec.kind, FeatureKind::Categorical { .. }));
        assert_eq!(spec.symbol(&RawValue::Text("2.0".into())).unwrap(), 1);
        let many = nums(&(0..30).map(f64::from).collect::<Vec<_>>());
        let spec = fit_quantizer("bgr", &many, KindHint::Auto, 8).unwrap();
        assert!(matches!(spec.kind, FeatureKind::Continuous { .. }));
    }

    #[test]
    fn fit_errors_and_degenerate_columns() {
        assert!(fit_quantizer("x", &[], KindHint::Auto, 4).is_err());
        assert!(fit_quantizer("x", &[RawValue::Missing, RawValue::Missing], KindHint::Auto, 4).is_err());
        let texty = vec![RawValue::Text("a".into())];
        assert!(fit_quantizer("x", &texty, KindHint::Continuous, 4).is_err());

        let constant = vec![RawValue::Number(7.0), RawValue::Number(7.0), RawValue::Missing];
        let spec = fit_quantizer("c", &constant, KindHint::Continuous, 4).unwrap();
        assert!(spec.degenerate);
        assert_eq!(spec.cardinality(), 2);
        assert_eq!(apply_quantizer(&spec, &constant).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn dataset_validation() {
        assert!(QuantizedDataset::from_symbols(vec![vec![0, 1]], vec![2], vec![0, 1], 2).is_ok());
        assert!(QuantizedDataset::from_symbols(vec![vec![0, 2]], vec![2], vec![0, 1], 2).is_err());
        assert!(QuantizedDataset::from_symbols(vec![vec![0]], vec![2], vec![0, 1], 2).is_err());
        assert!(QuantizedDataset::from_symbols(vec![vec![0, 1]], vec![2], vec![0, 3], 2).is_err());
    }

    #[test]
    fn dataset_fit_uses_declared_dictionaries() {
        use crate::dataio::{synthetic_ckd, SyntheticOptions};
        let raw = synthetic_ckd(&SyntheticOptions::default(), 4).unwrap();
        let mut config = QuantizerConfig::default();
        config.features.insert(
            "age".into(),
            FeatureOverride {
                kind: None,
                levels: Some(4),
            },
        );
        let specs = fit_dataset(&raw, &config).unwrap();
        let age = specs.iter().find(|s| s.name == "age").unwrap();
        assert!(matches!(age.kind, FeatureKind::Continuous { levels: 4, .. }));
        assert_eq!(age.cardinality(), 5);
        let sg = specs.iter().find(|s| s.name == "sg").unwrap();
        match &sg.kind {
            FeatureKind::Categorical { dictionary } => {
                assert_eq!(dictionary, &["1.005", "1.01", "1.015", "1.02", "1.025"])
            }
            other => panic!("{other:?}"),
        }
        let q = quantize_dataset(&raw, &specs).unwrap();
        assert_eq!(q.n_rows(), raw.n_rows());
        assert_eq!(q.class_names, vec!["ckd", "notckd"]);
        assert_eq!(q.labels, raw.labels());
    }

    #[test]
    fn dataset_fit_rejects_unknown_override() {
        use crate::dataio::{synthetic_ckd, SyntheticOptions};
        let raw = synthetic_ckd(
            &SyntheticOptions {
                rows: 20,
                ..Default::default()
            },
            1,
        )
        .unwrap();
        let mut config = QuantizerConfig::default();
        config.features.insert("nope".into(), FeatureOverride::default());
        assert!(matches!(fit_dataset(&raw, &config), Err(Error::Config(_))));
    }

    #[test]
    fn reserved_missing_absorbs_unseen_categories() {
        let train = vec![RawValue::Text("a".into()), RawValue::Text("b".into())];
        let mut spec = fit_quantizer("f", &train, KindHint::Auto, 10).unwrap();
        assert!(spec.symbol(&RawValue::Text("c".into())).is_err());
        spec.has_missing = true;
        assert_eq!(spec.symbol(&RawValue::Text("c".into())).unwrap(), 2);
    }

    fn raw_column() -> impl Strategy<Value = Vec<Option<f64>>> {
        prop::collection::vec(prop::option::weighted(0.9, -1e3f64..1e3), 1..60)
            .prop_filter("needs a value", |v| v.iter().any(Option::is_some))
    }

    proptest! {
        #[test]
        fn fit_then_apply_is_total_and_monotone(col in raw_column(), levels in 2usize..40) {
            let raw: Vec<RawValue> = col
                .iter()
                .map(|v| v.map_or(RawValue::Missing, RawValue::Number))
                .collect();
            let spec = fit_quantizer("f", &raw, KindHint::Continuous, levels).unwrap();
            let syms = apply_quantizer(&spec, &raw).unwrap();
            prop_assert!(syms.iter().all(|&s| s < spec.cardinality()));
            let mut pairs: Vec<(f64, usize)> = col
                .iter()
                .zip(&syms)
                .filter_map(|(v, &s)| v.map(|x| (x, s)))
                .collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            prop_assert!(pairs.windows(2).all(|w| w[0].1 <= w[1].1));
            prop_assert_eq!(fit_quantizer("f", &raw, KindHint::Continuous, levels).unwrap(), spec);
        }

        #[test]
        fn auto_fit_is_total(col in raw_column(), levels in 2usize..10) {
            let raw: Vec<RawValue> = col
                .iter()
                .map(|v| v.map_or(RawValue::Missing, |x| RawValue::Number(x.round())))
                .collect();
            let spec = fit_quantizer("f", &raw, KindHint::Auto, levels).unwrap();
            let syms = apply_quantizer(&spec, &raw).unwrap();
            prop_assert!(syms.iter().all(|&s| s < spec.cardinality()));
        }
    }
}
