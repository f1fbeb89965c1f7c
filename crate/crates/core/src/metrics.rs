//! Binary classification metrics and their aggregation over repeated runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Confusion counts with one class taken as positive.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
}

impl Confusion {
    /// Counts predictions against truth; every class other than `positive`
    /// is negative.
    pub fn count(truth: &[usize], predicted: &[usize], positive: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::Dimension {
                what: "prediction count",
                expected: truth.len(),
                got: predicted.len(),
            });
        }
        let mut c = Self::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t == positive, p == positive) {
                (true, true) => c.tp += 1,
                (false, false) => c.tn += 1,
                (false, true) => c.fp += 1,
                (true, false) => c.fn_ += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> u64 {
        self.tp + self.tn + self.fp + self.fn_
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores of one evaluation. Ratios with an empty denominator are 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
    pub confusion: Confusion,
}

impl Metrics {
    pub fn from_confusion(c: Confusion) -> Self {
        Self {
            accuracy: ratio(c.tp + c.tn, c.total()),
            sensitivity: ratio(c.tp, c.tp + c.fn_),
            specificity: ratio(c.tn, c.tn + c.fp),
            f1: ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn_),
            confusion: c,
        }
    }

    pub fn compute(truth: &[usize], predicted: &[usize], positive: usize) -> Result<Self> {
        Confusion::count(truth, predicted, positive).map(Self::from_confusion)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub accuracy: f64,
    pub sensitivity: f64,
    pub specificity: f64,
    pub f1: f64,
}

impl Scores {
    fn of(m: &Metrics) -> [f64; 4] {
        [m.accuracy, m.sensitivity, m.specificity, m.f1]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self {
            accuracy: a[0],
            sensitivity: a[1],
            specificity: a[2],
            f1: a[3],
        }
    }
}

/// Per-run metrics of one partition (train or test) plus their mean and
/// sample standard deviation (0 for a single run).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub mean: Scores,
    pub std: Scores,
    pub per_run: Vec<Metrics>,
}

impl PhaseReport {
    pub fn from_runs(per_run: Vec<Metrics>) -> Result<Self> {
        let n = per_run.len();
        if n == 0 {
            return Err(Error::validation("no runs to aggregate"));
        }
        let mut sum = [0.0; 4];
        for m in &per_run {
            for (s, v) in sum.iter_mut().zip(Scores::of(m)) {
                *s += v;
            }
        }
        let mean = sum.map(|s| s / n as f64);
        let mut sq = [0.0; 4];
        for m in &per_run {
            for ((s, v), mu) in sq.iter_mut().zip(Scores::of(m)).zip(mean) {
                *s += (v - mu) * (v - mu);
            }
        }
        let std = if n > 1 {
            sq.map(|s| (s / (n - 1) as f64).sqrt())
        } else {
            [0.0; 4]
        };
        Ok(Self {
            mean: Scores::from_array(mean),
            std: Scores::from_array(std),
            per_run,
        })
    }
}

/// Aggregated result of one or more split → train → evaluate runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub runs: usize,
    pub positive_class: String,
    pub train: PhaseReport,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub test: Option<PhaseReport>,
}
