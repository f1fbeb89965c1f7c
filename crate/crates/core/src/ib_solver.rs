//! Information-bottleneck solver for a single information node.
//!
//! Given the empirical input marginal `p(x)`, the relevance conditional
//! `p(y | x)`, the multiplier `beta` and an output cardinality, the solver
//! runs the Blahut–Arimoto style self-consistent iteration
//!
//! ```text
//! p(t)      = Σ_x p(x) p(t | x)
//! p(y | t)  = Σ_x p(y | x) p(x | t)
//! d(x, t)   = KL( p(y | x) || p(y | t) )            [bits]
//! p(t | x) ∝ p(t) · 2^(−beta · d(x, t))
//! ```
//!
//! The distortion is measured in bits and exponentiated in base 2, so the
//! pair is consistent: `2^(−β·d_bits) = e^(−β·d_nats)` and the fixed points
//! are the same as with natural units. Every update is a minimization step of
//! the IB free energy, so the Lagrangian `I(X;T) − β·I(Y;T)` is
//! non-increasing along the iteration.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infotheory::{
    joint_mutual_information, kl_slices, mutual_information, ConditionalMatrix, DiscreteDistribution,
    JointDistribution, STOCHASTIC_TOL,
};
use crate::rng::{stream, TAG_IB_INIT};

/// Training input of one information node.
#[derive(Debug, Clone)]
pub struct IBProblem {
    px: DiscreteDistribution,
    py_given_x: ConditionalMatrix,
    beta: f64,
    n_out: usize,
}

impl IBProblem {
    pub fn new(
        px: DiscreteDistribution,
        py_given_x: ConditionalMatrix,
        beta: f64,
        n_out: usize,
    ) -> Result<Self> {
        if beta.is_nan() || beta <= 0.0 || !beta.is_finite() {
            return Err(Error::validation(format!(
                "beta must be positive and finite, got {beta}"
            )));
        }
        if n_out == 0 {
            return Err(Error::validation("output cardinality must be at least 1"));
        }
        if py_given_x.rows() != px.len() {
            return Err(Error::Dimension {
                what: "p(y|x) rows vs p(x) length",
                expected: px.len(),
                got: py_given_x.rows(),
            });
        }
        Ok(Self {
            px,
            py_given_x,
            beta,
            n_out,
        })
    }

    pub fn px(&self) -> &DiscreteDistribution {
        &self.px
    }

    pub fn py_given_x(&self) -> &ConditionalMatrix {
        &self.py_given_x
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn n_in(&self) -> usize {
        self.px.len()
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn n_class(&self) -> usize {
        self.py_given_x.cols()
    }

    /// `I(X_in; Y)`: the most any channel can preserve.
    pub fn relevance(&self) -> f64 {
        // dimensions were checked at construction
        mutual_information(&self.px, &self.py_given_x).unwrap_or(0.0)
    }

    fn check_channel(&self, channel: &ConditionalMatrix) -> Result<()> {
        if channel.rows() != self.n_in() {
            return Err(Error::Dimension {
                what: "channel rows",
                expected: self.n_in(),
                got: channel.rows(),
            });
        }
        if channel.cols() != self.n_out {
            return Err(Error::Dimension {
                what: "channel columns",
                expected: self.n_out,
                got: channel.cols(),
            });
        }
        let err = channel.stochasticity_error();
        if err > STOCHASTIC_TOL {
            return Err(Error::validation(format!(
                "channel is not row-stochastic (max row error {err:e})"
            )));
        }
        Ok(())
    }

    /// Joint `p(t, y)` induced by a channel on the Markov chain `Y – X – T`.
    fn output_class_joint(&self, channel: &ConditionalMatrix) -> Vec<f64> {
        let (n_out, n_class) = (self.n_out, self.n_class());
        let mut joint = vec![0.0; n_out * n_class];
        for (i, &p) in self.px.probs().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let py = self.py_given_x.row(i);
            for (j, &c) in channel.row(i).iter().enumerate() {
                let w = p * c;
                if w == 0.0 {
                    continue;
                }
                joint[j * n_class..(j + 1) * n_class]
                    .iter_mut()
                    .zip(py)
                    .for_each(|(o, y)| *o += w * y);
            }
        }
        joint
    }

    fn class_prior(&self) -> Vec<f64> {
        self.py_given_x
            .push_forward(&self.px)
            .map(Vec::from)
            .unwrap_or_default()
    }
}

/// Convergence diagnostics of one solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IBDiagnostics {
    pub iterations: usize,
    /// Lagrangian after each update, in bits.
    pub lagrangian_trace: Vec<f64>,
    pub i_in_out: f64,
    pub i_y_out: f64,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct IBSolution {
    pub channel: ConditionalMatrix,
    pub p_out: DiscreteDistribution,
    pub py_given_out: ConditionalMatrix,
    pub diagnostics: IBDiagnostics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Stop once the largest elementwise channel change is below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 500,
        }
    }
}

/// Output marginal and `p(y | t)` implied by a channel. Rows of `p(y | t)`
/// for outputs with zero mass fall back to the class prior.
struct Posterior {
    p_out: Vec<f64>,
    py_given_out: Vec<f64>,
}

fn posterior(problem: &IBProblem, channel: &ConditionalMatrix) -> Posterior {
    let n_class = problem.n_class();
    let mut joint = problem.output_class_joint(channel);
    let prior = problem.class_prior();
    let p_out: Vec<f64> = joint.chunks_exact(n_class).map(|r| r.iter().sum()).collect();
    for (row, &pt) in joint.chunks_exact_mut(n_class).zip(&p_out) {
        if pt > 0.0 {
            row.iter_mut().for_each(|v| *v /= pt);
        } else {
            row.copy_from_slice(&prior);
        }
    }
    Posterior {
        p_out,
        py_given_out: joint,
    }
}

fn step_unchecked(problem: &IBProblem, channel: &ConditionalMatrix) -> ConditionalMatrix {
    let (n_in, n_out, n_class) = (problem.n_in(), problem.n_out(), problem.n_class());
    let post = posterior(problem, channel);
    let log_p_out: Vec<f64> = post.p_out.iter().map(|p| p.log2()).collect();
    let mut data = vec![0.0; n_in * n_out];
    let mut logw = vec![0.0; n_out];
    let mut dist = vec![0.0; n_out];

    for (i, out) in data.chunks_exact_mut(n_out).enumerate() {
        if problem.px.probs()[i] == 0.0 {
            out.copy_from_slice(&post.p_out);
            continue;
        }
        let py = problem.py_given_x.row(i);
        for j in 0..n_out {
            dist[j] = kl_slices(py, &post.py_given_out[j * n_class..(j + 1) * n_class]);
            logw[j] = if post.p_out[j] > 0.0 {
                log_p_out[j] - problem.beta * dist[j]
            } else {
                f64::NEG_INFINITY
            };
        }
        let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            // every weight underflowed: hard-assign to the closest output
            let best = dist
                .iter()
                .enumerate()
                .fold(
                    (0, f64::INFINITY),
                    |acc, (j, &d)| if d < acc.1 { (j, d) } else { acc },
                )
                .0;
            out[best] = 1.0;
            continue;
        }
        let mut z = 0.0;
        for (o, &lw) in out.iter_mut().zip(&logw) {
            *o = (lw - max).exp2();
            z += *o;
        }
        out.iter_mut().for_each(|o| *o /= z);
    }
    ConditionalMatrix::from_raw(n_in, n_out, data)
}

/// One full self-consistent update of a node's channel.
pub fn ib_step(problem: &IBProblem, channel: &ConditionalMatrix) -> Result<ConditionalMatrix> {
    problem.check_channel(channel)?;
    Ok(step_unchecked(problem, channel))
}

/// `I(Y; T)` for the given channel.
pub fn relevant_information(problem: &IBProblem, channel: &ConditionalMatrix) -> Result<f64> {
    problem.check_channel(channel)?;
    Ok(relevant_unchecked(problem, channel))
}

fn relevant_unchecked(problem: &IBProblem, channel: &ConditionalMatrix) -> f64 {
    let joint = problem.output_class_joint(channel);
    joint_mutual_information(&JointDistribution::from_raw(
        problem.n_out(),
        problem.n_class(),
        joint,
    ))
}

fn lagrangian_unchecked(problem: &IBProblem, channel: &ConditionalMatrix) -> f64 {
    let compression = mutual_information(&problem.px, channel).unwrap_or(0.0);
    compression - problem.beta * relevant_unchecked(problem, channel)
}

/// `I(X_in; X_out) − beta · I(Y; X_out)` in bits.
pub fn lagrangian(problem: &IBProblem, channel: &ConditionalMatrix) -> Result<f64> {
    problem.check_channel(channel)?;
    Ok(lagrangian_unchecked(problem, channel))
}

fn random_channel(rows: usize, cols: usize, seed: u64) -> ConditionalMatrix {
    let mut rng = stream(seed, &[TAG_IB_INIT]);
    let mut data: Vec<f64> = (0..rows * cols)
        // exponential draws give a flat Dirichlet row after normalization
        .map(|_| (-(1.0 - rng.gen::<f64>()).ln()).max(1e-12))
        .collect();
    for row in data.chunks_exact_mut(cols) {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= s);
    }
    ConditionalMatrix::from_raw(rows, cols, data)
}

/// Runs the self-consistent iteration from a seeded random channel.
///
/// Non-convergence within `max_iter` is reported through
/// `diagnostics.converged`, not as an error.
pub fn solve_ib(problem: &IBProblem, options: SolverOptions, seed: u64) -> Result<IBSolution> {
    if options.tol.is_nan() || options.tol <= 0.0 {
        return Err(Error::validation("tolerance must be positive"));
    }
    if options.max_iter == 0 {
        return Err(Error::validation("max_iter must be at least 1"));
    }
    let mut channel = random_channel(problem.n_in(), problem.n_out(), seed);
    let mut trace = Vec::with_capacity(options.max_iter.min(64));
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iter {
        let next = step_unchecked(problem, &channel);
        iterations += 1;
        let delta = next.max_abs_diff(&channel);
        channel = next;
        trace.push(lagrangian_unchecked(problem, &channel));
        if delta < options.tol {
            converged = true;
            break;
        }
    }

    let post = posterior(problem, &channel);
    let (n_in, n_out) = (problem.n_in(), problem.n_out());
    let mut data = channel.data().to_vec();
    for (row, &p) in data.chunks_exact_mut(n_out).zip(problem.px.probs()) {
        if p == 0.0 {
            row.copy_from_slice(&post.p_out);
        }
    }
    let channel = ConditionalMatrix::from_raw(n_in, n_out, data);
    let i_in_out = mutual_information(&problem.px, &channel)?;
    let i_y_out = relevant_unchecked(problem, &channel);
    Ok(IBSolution {
        p_out: DiscreteDistribution::new(post.p_out)?,
        py_given_out: ConditionalMatrix::new(problem.n_out(), problem.n_class(), post.py_given_out)?,
        channel,
        diagnostics: IBDiagnostics {
            iterations,
            lagrangian_trace: trace,
            i_in_out,
            i_y_out,
            converged,
        },
    })
}

/// Frequency estimates of `p(x)` and `p(y | x)` from paired training vectors.
///
/// Rows of `p(y | x)` for symbols absent from `x_symbols` are set to the
/// overall class prior.
pub fn estimate_empirical(
    x_symbols: &[usize],
    y_labels: &[usize],
    n_in: usize,
    n_class: usize,
) -> Result<(DiscreteDistribution, ConditionalMatrix)> {
    if x_symbols.is_empty() {
        return Err(Error::validation("cannot estimate from empty vectors"));
    }
    if x_symbols.len() != y_labels.len() {
        return Err(Error::Dimension {
            what: "label vector length",
            expected: x_symbols.len(),
            got: y_labels.len(),
        });
    }
    if n_in == 0 || n_class == 0 {
        return Err(Error::validation("alphabet sizes must be positive"));
    }
    let mut counts = vec![0usize; n_in * n_class];
    let mut class_counts = vec![0usize; n_class];
    for (&x, &y) in x_symbols.iter().zip(y_labels) {
        if x >= n_in {
            return Err(Error::validation(format!("input symbol {x} not below {n_in}")));
        }
        if y >= n_class {
            return Err(Error::validation(format!("class label {y} not below {n_class}")));
        }
        counts[x * n_class + y] += 1;
        class_counts[y] += 1;
    }
    let n = x_symbols.len() as f64;
    let prior: Vec<f64> = class_counts.iter().map(|&c| c as f64 / n).collect();
    let mut px = Vec::with_capacity(n_in);
    let mut cond = Vec::with_capacity(n_in * n_class);
    for row in counts.chunks_exact(n_class) {
        let total: usize = row.iter().sum();
        px.push(total as f64 / n);
        if total == 0 {
            cond.extend_from_slice(&prior);
        } else {
            cond.extend(row.iter().map(|&c| c as f64 / total as f64));
        }
    }
    Ok((
        DiscreteDistribution::new(px)?,
        ConditionalMatrix::new(n_in, n_class, cond)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::infotheory::entropy;
    use approx::assert_abs_diff_eq;

    fn clusters_problem(beta: f64, n_out: usize) -> IBProblem {
        let px = DiscreteDistribution::uniform(4).unwrap();
        let py = ConditionalMatrix::from_rows(vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ])
        .unwrap();
        IBProblem::new(px, py, beta, n_out).unwrap()
    }

    #[test]
    fn estimate_empirical_examples() {
        let (px, py) = estimate_empirical(&[0, 0, 1, 1], &[0, 0, 1, 1], 2, 2).unwrap();
        assert_eq!(px.probs(), &[0.5, 0.5]);
        assert_eq!(py, ConditionalMatrix::identity(2).unwrap());

        let (px, py) = estimate_empirical(&[0, 0, 0, 0], &[0, 1, 0, 1], 2, 2).unwrap();
        assert_eq!(px.probs(), &[1.0, 0.0]);
        assert_eq!(py.row(0), &[0.5, 0.5]);

        let (px, py) = estimate_empirical(&[0, 1], &[1, 0], 3, 2).unwrap();
        assert_eq!(px.probs(), &[0.5, 0.5, 0.0]);
        assert_eq!(py.row(2), &[0.5, 0.5]);
    }

    #[test]
    fn estimate_empirical_errors() {
        assert!(estimate_empirical(&[], &[], 2, 2).is_err());
        assert!(estimate_empirical(&[2], &[0], 2, 2).is_err());
        assert!(estimate_empirical(&[0], &[5], 2, 2).is_err());
        assert!(estimate_empirical(&[0, 1], &[0], 2, 2).is_err());
    }

    #[test]
    fn problem_validation() {
        let px = DiscreteDistribution::uniform(2).unwrap();
        let py = ConditionalMatrix::identity(2).unwrap();
        assert!(IBProblem::new(px.clone(), py.clone(), 0.0, 2).is_err());
        assert!(IBProblem::new(px.clone(), py.clone(), 1.0, 0).is_err());
        let py3 = ConditionalMatrix::identity(3).unwrap();
        assert!(IBProblem::new(px, py3, 1.0, 2).is_err());
    }

    #[test]
    fn step_rejects_bad_channels() {
        let p = clusters_problem(5.0, 2);
        assert!(ib_step(&p, &ConditionalMatrix::identity(2).unwrap()).is_err());
        let bad = ConditionalMatrix::from_raw(4, 2, vec![0.5, 0.4, 1.0, 0.0, 1.0, 0.0, 0.5, 0.5]);
        assert!(ib_step(&p, &bad).is_err());
    }

    #[test]
    fn tiny_beta_maps_rows_to_output_marginal() {
        let p = clusters_problem(1e-12, 3);
        let ch = random_channel(4, 3, 11);
        let next = ib_step(&p, &ch).unwrap();
        let p_out = ch.push_forward(p.px()).unwrap();
        for row in next.row_iter() {
            for (a, b) in row.iter().zip(p_out.probs()) {
                assert_abs_diff_eq!(*a, *b, epsilon = 1e-9);
            }
        }
        let sol = solve_ib(&p, SolverOptions::default(), 3).unwrap();
        assert!(sol.diagnostics.i_in_out < 1e-9);
    }

    #[test]
    fn single_output_is_column_of_ones() {
        for beta in [0.1, 5.0, 100.0] {
            let p = clusters_problem(beta, 1);
            let ch = ConditionalMatrix::from_raw(4, 1, vec![1.0; 4]);
            let next = ib_step(&p, &ch).unwrap();
            assert!(next.data().iter().all(|&v| v == 1.0));
        }
    }

    #[test]
    fn converged_channel_is_a_fixed_point() {
        let p = clusters_problem(2.0, 3);
        let sol = solve_ib(
            &p,
            SolverOptions {
                tol: 1e-12,
                max_iter: 5000,
            },
            9,
        )
        .unwrap();
        assert!(sol.diagnostics.converged);
        let again = ib_step(&p, &sol.channel).unwrap();
        assert!(again.max_abs_diff(&sol.channel) < 1e-8);
    }

    #[test]
    fn clean_clusters_are_recovered() {
        let p = clusters_problem(5.0, 2);
        let sol = solve_ib(&p, SolverOptions::default(), 1).unwrap();
        assert!(sol.diagnostics.converged);
        assert_abs_diff_eq!(sol.diagnostics.i_y_out, p.relevance(), epsilon = 1e-3);
        let a = sol.channel.row(0);
        let c = sol.channel.row(2);
        for row in sol.channel.row_iter() {
            assert!(row.iter().any(|&v| v > 0.999));
        }
        assert_abs_diff_eq!(a[0], sol.channel.row(1)[0], epsilon = 1e-6);
        assert!((a[0] - c[0]).abs() > 0.99);
    }

    #[test]
    fn hard_assignment_brute_force_agrees() {
        // Among all 2^4 hard assignments, the best I(Y;T) equals I(X;Y).
        let p = clusters_problem(5.0, 2);
        let best = (0u32..16)
            .map(|mask| {
                let data = (0..4)
                    .flat_map(|i| {
                        if mask >> i & 1 == 1 {
                            [0.0, 1.0]
                        } else {
                            [1.0, 0.0]
                        }
                    })
                    .collect();
                relevant_information(&p, &ConditionalMatrix::from_raw(4, 2, data)).unwrap()
            })
            .fold(0.0, f64::max);
        assert_abs_diff_eq!(best, p.relevance(), epsilon = 1e-12);
        let sol = solve_ib(&p, SolverOptions::default(), 2).unwrap();
        assert_abs_diff_eq!(sol.diagnostics.i_y_out, best, epsilon = 1e-3);
    }

    #[test]
    fn small_beta_compresses() {
        let p = clusters_problem(0.001, 2);
        let sol = solve_ib(&p, SolverOptions::default(), 5).unwrap();
        assert!(sol.diagnostics.i_in_out < 0.01);
    }

    #[test]
    fn large_beta_keeps_all_relevant_information() {
        // three distinct p(y|x) rows, n_out = n_class = 3
        let px = DiscreteDistribution::new(vec![0.2, 0.1, 0.3, 0.15, 0.25]).unwrap();
        let py = ConditionalMatrix::from_rows(vec![
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.1, 0.1, 0.8],
            vec![0.8, 0.1, 0.1],
            vec![0.1, 0.8, 0.1],
        ])
        .unwrap();
        let p = IBProblem::new(px.clone(), py.clone(), 200.0, 3).unwrap();
        let target = mutual_information(&px, &py).unwrap();
        let sol = solve_ib(
            &p,
            SolverOptions {
                tol: 1e-10,
                max_iter: 5000,
            },
            4,
        )
        .unwrap();
        assert_abs_diff_eq!(sol.diagnostics.i_y_out, target, epsilon = 1e-3);
    }

    #[test]
    fn lagrangian_examples() {
        let px = DiscreteDistribution::uniform(2).unwrap();
        let id = ConditionalMatrix::identity(2).unwrap();
        let p = IBProblem::new(px.clone(), id.clone(), 5.0, 2).unwrap();
        assert_abs_diff_eq!(lagrangian(&p, &id).unwrap(), -4.0, epsilon = 1e-12);
        let flat = ConditionalMatrix::from_rows(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        assert_abs_diff_eq!(lagrangian(&p, &flat).unwrap(), 0.0, epsilon = 1e-12);
        assert!(lagrangian(&p, &ConditionalMatrix::identity(3).unwrap()).is_err());
    }

    #[test]
    fn lagrangian_trace_is_non_increasing() {
        let py = ConditionalMatrix::from_rows(vec![
            vec![0.9, 0.1],
            vec![0.7, 0.3],
            vec![0.4, 0.6],
            vec![0.05, 0.95],
            vec![0.5, 0.5],
        ])
        .unwrap();
        let px = DiscreteDistribution::new(vec![0.1, 0.3, 0.2, 0.25, 0.15]).unwrap();
        for seed in 0..10 {
            let p = IBProblem::new(px.clone(), py.clone(), 5.0, 3).unwrap();
            let sol = solve_ib(&p, SolverOptions::default(), seed).unwrap();
            for w in sol.diagnostics.lagrangian_trace.windows(2) {
                assert!(w[1] <= w[0] + 1e-12, "seed {seed}: {} > {}", w[1], w[0]);
            }
        }
    }

    #[test]
    fn zero_mass_rows_follow_output_marginal() {
        let (px, py) = estimate_empirical(&[0, 0, 1, 1, 1], &[0, 0, 1, 1, 0], 3, 2).unwrap();
        let p = IBProblem::new(px, py, 5.0, 2).unwrap();
        let sol = solve_ib(&p, SolverOptions::default(), 0).unwrap();
        for (a, b) in sol.channel.row(2).iter().zip(sol.p_out.probs()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn solution_is_internally_consistent() {
        let p = clusters_problem(3.0, 3);
        let sol = solve_ib(&p, SolverOptions::default(), 21).unwrap();
        let p_out = sol.channel.push_forward(p.px()).unwrap();
        for (a, b) in p_out.probs().iter().zip(sol.p_out.probs()) {
            assert_abs_diff_eq!(*a, *b, epsilon = 1e-8);
        }
        let hx = entropy(p.px());
        assert!(sol.diagnostics.i_in_out <= hx.min(3f64.log2()) + 1e-9);
        assert!(sol.diagnostics.i_y_out <= p.relevance() + 1e-9);
    }

    #[test]
    fn solve_is_deterministic() {
        let p = clusters_problem(1.5, 3);
        let a = solve_ib(&p, SolverOptions::default(), 77).unwrap();
        let b = solve_ib(&p, SolverOptions::default(), 77).unwrap();
        assert_eq!(a.channel, b.channel);
        assert_eq!(a.diagnostics, b.diagnostics);
    }
}
