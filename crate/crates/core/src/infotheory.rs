//! Discrete information-theory primitives.
//!
//! All quantities are in bits. `0·log 0` is taken as 0; a KL term with
//! `p > 0` and `q = 0` is `+inf`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that probabilities sum to one.
pub const STOCHASTIC_TOL: f64 = 1e-9;

/// `p · log2(p / q)` with the usual conventions at zero.
#[inline]
pub(crate) fn kl_term(p: f64, q: f64) -> f64 {
    if p <= 0.0 {
        0.0
    } else if q <= 0.0 {
        f64::INFINITY
    } else {
        p * (p / q).log2()
    }
}

/// `-Σ p log2 p` over a raw slice, skipping zeros. No validation.
#[inline]
pub(crate) fn entropy_of(probs: &[f64]) -> f64 {
    -probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| p * p.log2())
        .sum::<f64>()
}

fn check_probs(probs: &[f64], what: &str) -> Result<()> {
    if probs.is_empty() {
        return Err(Error::validation(format!("{what}: empty probability vector")));
    }
    if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::validation(format!("{what}: invalid entry {bad}")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > STOCHASTIC_TOL {
        return Err(Error::validation(format!(
            "{what}: entries sum to {total}, not 1"
        )));
    }
    Ok(())
}

fn normalize_weights(weights: &mut [f64], what: &str) -> Result<()> {
    if let Some(bad) = weights.iter().find(|w| !w.is_finite() || **w < 0.0) {
        return Err(Error::validation(format!("{what}: invalid weight {bad}")));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return Err(Error::validation(format!("{what}: weights sum to zero")));
    }
    weights.iter_mut().for_each(|w| *w /= total);
    Ok(())
}

/// A probability mass function over `0..len()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DiscreteDistribution {
    probs: Vec<f64>,
}

impl DiscreteDistribution {
    /// Validates without modifying the entries.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        check_probs(&probs, "distribution")?;
        Ok(Self { probs })
    }

    /// Renormalizes non-negative weights to sum to one.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::validation("distribution: empty weight vector"));
        }
        normalize_weights(&mut weights, "distribution")?;
        Ok(Self { probs: weights })
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("distribution: empty alphabet"));
        }
        Ok(Self {
            probs: vec![1.0 / n as f64; n],
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }
}

impl TryFrom<Vec<f64>> for DiscreteDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DiscreteDistribution> for Vec<f64> {
    fn from(d: DiscreteDistribution) -> Self {
        d.probs
    }
}

#[derive(Deserialize)]
struct MatrixRepr {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

/// Row-stochastic matrix: entry `(i, j)` is `P(out = j | in = i)`.
///
/// Stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MatrixRepr")]
pub struct ConditionalMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl TryFrom<MatrixRepr> for ConditionalMatrix {
    type Error = Error;
    fn try_from(r: MatrixRepr) -> Result<Self> {
        Self::new(r.rows, r.cols, r.data)
    }
}

impl ConditionalMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::validation("conditional matrix: zero-sized dimension"));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension {
                what: "conditional matrix data length",
                expected: rows * cols,
                got: data.len(),
            });
        }
        for (i, row) in data.chunks_exact(cols).enumerate() {
            check_probs(row, &format!("conditional matrix row {i}"))?;
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::validation("conditional matrix: ragged rows"));
        }
        Self::new(n, cols, rows.into_iter().flatten().collect())
    }

    /// Normalizes every row of a non-negative weight matrix.
    pub fn from_weight_rows(rows: usize, cols: usize, mut data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::validation("conditional matrix: bad weight dimensions"));
        }
        for (i, row) in data.chunks_exact_mut(cols).enumerate() {
            normalize_weights(row, &format!("conditional matrix row {i}"))?;
        }
        Ok(Self { rows, cols, data })
    }

    /// Trusted constructor for internally generated stochastic data.
    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("identity: empty alphabet"));
        }
        let mut data = vec![0.0; n * n];
        (0..n).for_each(|i| data[i * n + i] = 1.0);
        Ok(Self {
            rows: n,
            cols: n,
            data,
        })
    }

    /// Every row equal to `d`.
    pub fn constant_rows(rows: usize, d: &DiscreteDistribution) -> Self {
        let data = (0..rows).flat_map(|_| d.probs().iter().copied()).collect();
        Self::from_raw(rows, d.len(), data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Largest absolute elementwise difference; `inf` if shapes differ.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        if self.rows != other.rows || self.cols != other.cols {
            return f64::INFINITY;
        }
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest `|Σ_j row_i(j) − 1|` over rows.
    pub fn stochasticity_error(&self) -> f64 {
        self.row_iter()
            .map(|r| (r.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// `px^T · self`: the output marginal under input distribution `px`.
    pub fn push_forward(&self, px: &DiscreteDistribution) -> Result<DiscreteDistribution> {
        if px.len() != self.rows {
            return Err(Error::Dimension {
                what: "push_forward input",
                expected: self.rows,
                got: px.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (p, row) in px.probs().iter().zip(self.row_iter()) {
            if *p > 0.0 {
                out.iter_mut().zip(row).for_each(|(o, r)| *o += p * r);
            }
        }
        Ok(DiscreteDistribution { probs: out })
    }

    /// Matrix product `self · other` (composition of channels).
    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::Dimension {
                what: "channel composition",
                expected: self.cols,
                got: other.rows,
            });
        }
        let mut data = vec![0.0; self.rows * other.cols];
        for (out, row) in data.chunks_exact_mut(other.cols).zip(self.row_iter()) {
            for (k, &a) in row.iter().enumerate() {
                if a != 0.0 {
                    out.iter_mut().zip(other.row(k)).for_each(|(o, b)| *o += a * b);
                }
            }
        }
        Ok(Self::from_raw(self.rows, other.cols, data))
    }

    /// Kronecker product of channels with the *first* factor as the
    /// low-order digit of both the row and column index, matching the
    /// multiplexer's mixed-radix convention. Equivalent to the textbook
    /// Kronecker product of the factors in reverse order.
    pub fn kron_mixed_radix(factors: &[&Self]) -> Result<Self> {
        let Some((first, rest)) = factors.split_first() else {
            return Err(Error::validation("kronecker product of zero factors"));
        };
        let mut acc = (*first).clone();
        for f in rest {
            // new index = acc_index + acc_size * f_index
            let rows = acc.rows * f.rows;
            let cols = acc.cols * f.cols;
            let mut data = vec![0.0; rows * cols];
            for fi in 0..f.rows {
                for ai in 0..acc.rows {
                    let r = ai + acc.rows * fi;
                    let out = &mut data[r * cols..(r + 1) * cols];
                    for (fj, &fv) in f.row(fi).iter().enumerate() {
                        if fv == 0.0 {
                            continue;
                        }
                        let base = acc.cols * fj;
                        for (aj, &av) in acc.row(ai).iter().enumerate() {
                            out[base + aj] = av * fv;
                        }
                    }
                }
            }
            acc = Self::from_raw(rows, cols, data);
        }
        Ok(acc)
    }
}

/// Joint probability table over `(a, b)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl JointDistribution {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || data.len() != rows * cols {
            return Err(Error::validation("joint distribution: bad dimensions"));
        }
        check_probs(&data, "joint distribution")?;
        Ok(Self { rows, cols, data })
    }

    /// Plug-in estimate from paired samples `a[n] < rows`, `b[n] < cols`.
    pub fn from_samples(a: &[usize], b: &[usize], rows: usize, cols: usize) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::Dimension {
                what: "paired sample lengths",
                expected: a.len(),
                got: b.len(),
            });
        }
        if a.is_empty() {
            return Err(Error::validation("joint distribution: no samples"));
        }
        let mut counts = vec![0.0; rows * cols];
        for (&x, &y) in a.iter().zip(b) {
            if x >= rows || y >= cols {
                return Err(Error::validation(format!(
                    "sample ({x}, {y}) outside {rows}x{cols} alphabet"
                )));
            }
            counts[x * cols + y] += 1.0;
        }
        let n = a.len() as f64;
        counts.iter_mut().for_each(|c| *c /= n);
        Ok(Self {
            rows,
            cols,
            data: counts,
        })
    }

    /// `p(a, b) = p(a) · p(b | a)`.
    pub fn from_marginal_and_conditional(
        pa: &DiscreteDistribution,
        cond: &ConditionalMatrix,
    ) -> Result<Self> {
        if pa.len() != cond.rows() {
            return Err(Error::Dimension {
                what: "marginal vs conditional rows",
                expected: cond.rows(),
                got: pa.len(),
            });
        }
        let data = pa
            .probs()
            .iter()
            .zip(cond.row_iter())
            .flat_map(|(p, row)| row.iter().map(move |c| p * c))
            .collect();
        Ok(Self {
            rows: cond.rows(),
            cols: cond.cols(),
            data,
        })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.data[a * self.cols + b]
    }

    pub fn marginal_a(&self) -> Vec<f64> {
        self.data
            .chunks_exact(self.cols)
            .map(|r| r.iter().sum())
            .collect()
    }

    pub fn marginal_b(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.data.chunks_exact(self.cols) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for a in 0..self.rows {
            for b in 0..self.cols {
                data[b * self.rows + a] = self.data[a * self.cols + b];
            }
        }
        Self {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    pub fn joint_entropy(&self) -> f64 {
        entropy_of(&self.data)
    }
}

/// Shannon entropy in bits.
pub fn entropy(d: &DiscreteDistribution) -> f64 {
    entropy_of(d.probs())
}

/// `KL(p || q)` in bits; `+inf` when `p` puts mass where `q` has none.
pub fn kl_divergence(p: &DiscreteDistribution, q: &DiscreteDistribution) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension {
            what: "KL alphabet size",
            expected: p.len(),
            got: q.len(),
        });
    }
    Ok(kl_slices(p.probs(), q.probs()))
}

#[inline]
pub(crate) fn kl_slices(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .map(|(&a, &b)| kl_term(a, b))
        .sum::<f64>()
        .max(0.0)
}

/// `I(X; T)` for input marginal `px` and channel `p(t | x)`.
pub fn mutual_information(px: &DiscreteDistribution, cond: &ConditionalMatrix) -> Result<f64> {
    let pt = cond.push_forward(px)?;
    let mi: f64 = px
        .probs()
        .iter()
        .zip(cond.row_iter())
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, row)| p * kl_slices(row, pt.probs()))
        .sum();
    Ok(mi.max(0.0))
}

/// `I(A; B) = H(A) + H(B) − H(A, B)`.
pub fn joint_mutual_information(j: &JointDistribution) -> f64 {
    let ha = entropy_of(&j.marginal_a());
    let hb = entropy_of(&j.marginal_b());
    (ha + hb - j.joint_entropy()).max(0.0)
}

/// Plug-in `I(A; B)` from paired samples.
pub fn empirical_mutual_information(a: &[usize], b: &[usize], a_card: usize, b_card: usize) -> Result<f64> {
    Ok(joint_mutual_information(&JointDistribution::from_samples(
        a, b, a_card, b_card,
    )?))
}

/// Plug-in entropy of a symbol vector.
pub fn empirical_entropy(symbols: &[usize], card: usize) -> Result<f64> {
    if symbols.is_empty() {
        return Err(Error::validation("entropy of empty sample"));
    }
    let mut counts = vec![0.0; card];
    for &s in symbols {
        if s >= card {
            return Err(Error::validation(format!(
                "symbol {s} outside alphabet of size {card}"
            )));
        }
        counts[s] += 1.0;
    }
    let n = symbols.len() as f64;
    counts.iter_mut().for_each(|c| *c /= n);
    Ok(entropy_of(&counts))
}
