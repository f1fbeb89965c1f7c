//! The layered tree of information nodes and multiplexers.
//!
//! Layer 0 has one node per feature. Each following layer is fed by
//! multiplexers that merge adjacent nodes of the previous layer (pairs, with
//! a final triple when the width is odd) until a single node with
//! `N_class` outputs remains. Nodes are trained layer by layer: each solves
//! its own information-bottleneck problem against the labels, then samples
//! its output vector from the learned channel, and the multiplexed samples
//! become the next layer's training inputs.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataio::RawDataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::ib_solver::{estimate_empirical, solve_ib, IBDiagnostics, IBProblem, SolverOptions};
use crate::infotheory::{ConditionalMatrix, DiscreteDistribution};
use crate::quantizer::{FeatureSpec, QuantizedDataset};
use crate::rng::{derive_seed, stream, StreamRng, TAG_IB_INIT, TAG_PREDICT, TAG_TRAIN_SAMPLE};

/// Largest multiplexer arity produced by [`build_topology`].
pub const MAX_ARITY: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeShape {
    pub n_in: usize,
    pub n_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Layer {
    pub nodes: Vec<NodeShape>,
    /// `groups[k]` lists the previous-layer nodes multiplexed into node `k`,
    /// first member as the low-order digit. Empty for layer 0.
    pub groups: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub layers: Vec<Layer>,
}

/// Partition `0..width` into adjacent pairs, ending with a triple when
/// `width` is odd.
fn group_layer(width: usize) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = Vec::with_capacity(width / 2);
    let paired_until = if width % 2 == 1 { width - 3 } else { width };
    for start in (0..paired_until).step_by(2) {
        groups.push(vec![start, start + 1]);
    }
    if width % 2 == 1 {
        groups.push(vec![width - 3, width - 2, width - 1]);
    }
    groups
}

fn checked_product(factors: impl IntoIterator<Item = usize>) -> Result<usize> {
    factors.into_iter().try_fold(1usize, |acc, f| {
        acc.checked_mul(f)
            .ok_or_else(|| Error::Config("multiplexer alphabet size overflows".into()))
    })
}

/// Layer widths of the reduction tree for `d` features.
pub fn layer_widths(d: usize) -> Vec<usize> {
    let mut widths = vec![d];
    let mut w = d;
    while w > 1 {
        w = group_layer(w).len();
        widths.push(w);
    }
    widths
}

/// Builds the tree for `d` features.
///
/// `n_out_per_layer` gives the output cardinality of every layer but the
/// last (whose output is always `n_class`); a trailing entry equal to
/// `n_class` is also accepted.
pub fn build_topology(
    d: usize,
    n_out_per_layer: &[usize],
    n_class: usize,
    feature_cardinalities: &[usize],
) -> Result<Topology> {
    if d == 0 {
        return Err(Error::Config("a network needs at least one feature".into()));
    }
    if feature_cardinalities.len() != d {
        return Err(Error::Config(format!(
            "{} feature cardinalities given for {d} features",
            feature_cardinalities.len()
        )));
    }
    if feature_cardinalities.contains(&0) {
        return Err(Error::Config("feature cardinalities must be positive".into()));
    }
    if n_class < 1 {
        return Err(Error::Config("n_class must be positive".into()));
    }
    let widths = layer_widths(d);
    let depth = widths.len() - 1;
    let mut n_out: Vec<usize> = match n_out_per_layer.len() {
        l if l == depth => n_out_per_layer.iter().copied().chain([n_class]).collect(),
        l if l == depth + 1 => {
            if n_out_per_layer[depth] != n_class {
                return Err(Error::Config(format!(
                    "final layer must have n_out = n_class = {n_class}, got {}",
                    n_out_per_layer[depth]
                )));
            }
            n_out_per_layer.to_vec()
        }
        l => {
            return Err(Error::Config(format!(
                "{d} features give a depth-{depth} tree needing {depth} per-layer n_out values \
                 (optionally followed by n_class), got {l}"
            )))
        }
    };
    if n_out.contains(&0) {
        return Err(Error::Config("n_out values must be positive".into()));
    }
    n_out[depth] = n_class;

    let mut layers = Vec::with_capacity(depth + 1);
    layers.push(Layer {
        nodes: feature_cardinalities
            .iter()
            .map(|&n_in| NodeShape {
                n_in,
                n_out: n_out[0],
            })
            .collect(),
        groups: Vec::new(),
    });
    for (l, &out) in n_out.iter().enumerate().skip(1) {
        let prev: &Layer = &layers[l - 1];
        let groups = group_layer(prev.nodes.len());
        let nodes = groups
            .iter()
            .map(|g| {
                Ok(NodeShape {
                    n_in: checked_product(g.iter().map(|&m| prev.nodes[m].n_out))?,
                    n_out: out,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        layers.push(Layer { nodes, groups });
    }
    Ok(Topology { layers })
}

impl Topology {
    pub fn depth(&self) -> usize {
        self.layers.len() - 1
    }

    pub fn n_features(&self) -> usize {
        self.layers[0].nodes.len()
    }

    pub fn n_class(&self) -> usize {
        self.layers[self.depth()].nodes[0].n_out
    }

    pub fn n_nodes(&self) -> usize {
        self.layers.iter().map(|l| l.nodes.len()).sum()
    }

    pub fn n_mixers(&self) -> usize {
        self.layers.iter().map(|l| l.groups.len()).sum()
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.nodes.len()).collect()
    }

    pub fn feature_cardinalities(&self) -> Vec<usize> {
        self.layers[0].nodes.iter().map(|n| n.n_in).collect()
    }

    /// Radices of the multiplexer feeding `(layer, position)`.
    pub fn radices(&self, layer: usize, position: usize) -> Vec<usize> {
        self.layers[layer].groups[position]
            .iter()
            .map(|&m| self.layers[layer - 1].nodes[m].n_out)
            .collect()
    }

    /// Overrides one node's output cardinality and recomputes the input
    /// cardinality of the node it feeds.
    pub fn with_node_n_out(mut self, layer: usize, position: usize, n_out: usize) -> Result<Self> {
        if layer >= self.layers.len() || position >= self.layers[layer].nodes.len() {
            return Err(Error::Config(format!(
                "no node at layer {layer}, position {position}"
            )));
        }
        if layer == self.depth() {
            return Err(Error::Config("the final node's n_out is fixed to n_class".into()));
        }
        if n_out == 0 {
            return Err(Error::Config("n_out must be positive".into()));
        }
        self.layers[layer].nodes[position].n_out = n_out;
        let next = layer + 1;
        let target = self.layers[next]
            .groups
            .iter()
            .position(|g| g.contains(&position))
            .expect("every node belongs to a group");
        let n_in = checked_product(self.radices(next, target))?;
        self.layers[next].nodes[target].n_in = n_in;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(format!("topology: {m}")));
        if self.layers.is_empty() || self.layers[0].nodes.is_empty() {
            return bad("no layers".into());
        }
        if !self.layers[0].groups.is_empty() {
            return bad("layer 0 cannot have multiplexers".into());
        }
        if self.layers[self.depth()].nodes.len() != 1 {
            return bad("final layer must have exactly one node".into());
        }
        for (l, layer) in self.layers.iter().enumerate().skip(1) {
            if layer.groups.len() != layer.nodes.len() {
                return bad(format!("layer {l}: group count differs from node count"));
            }
            let mut members: Vec<usize> = layer.groups.iter().flatten().copied().collect();
            members.sort_unstable();
            if members != (0..self.layers[l - 1].nodes.len()).collect::<Vec<_>>() {
                return bad(format!("layer {l}: groups do not partition the previous layer"));
            }
            for (k, node) in layer.nodes.iter().enumerate() {
                if layer.groups[k].is_empty() {
                    return bad(format!("layer {l}: empty group"));
                }
                if checked_product(self.radices(l, k))? != node.n_in {
                    return bad(format!(
                        "layer {l} node {k}: n_in is not the product of its radices"
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Mixed-radix combination `v0 + r0·v1 + r0·r1·v2 + …`.
pub fn mux_combine(inputs: &[&[usize]], radices: &[usize]) -> Result<Vec<usize>> {
    if inputs.len() != radices.len() {
        return Err(Error::Dimension {
            what: "multiplexer radices",
            expected: inputs.len(),
            got: radices.len(),
        });
    }
    let Some(first) = inputs.first() else {
        return Err(Error::validation("multiplexer needs at least one input"));
    };
    let n = first.len();
    if let Some(bad) = inputs.iter().find(|v| v.len() != n) {
        return Err(Error::Dimension {
            what: "multiplexer input length",
            expected: n,
            got: bad.len(),
        });
    }
    checked_product(radices.iter().copied())?;
    let mut out = vec![0usize; n];
    let mut place = 1usize;
    for (k, (v, &r)) in inputs.iter().zip(radices).enumerate() {
        for (o, &s) in out.iter_mut().zip(v.iter()) {
            if s >= r {
                return Err(Error::validation(format!(
                    "multiplexer input {k}: symbol {s} not below radix {r}"
                )));
            }
            *o += place * s;
        }
        place *= r;
    }
    Ok(out)
}

/// Inverse of [`mux_combine`] for a single symbol.
pub fn mux_split(mut symbol: usize, radices: &[usize]) -> Vec<usize> {
    radices
        .iter()
        .map(|&r| {
            let digit = symbol % r;
            symbol /= r;
            digit
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedNode {
    pub channel: ConditionalMatrix,
    pub n_in: usize,
    pub n_out: usize,
    pub diagnostics: IBDiagnostics,
    /// `I(X_in; Y)` on the node's training inputs, bits.
    pub mi_in_y: f64,
    /// `I(X_out; Y)` implied by the learned channel, bits.
    pub mi_out_y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DINModel {
    pub topology: Topology,
    /// `nodes[layer][position]`.
    pub nodes: Vec<Vec<TrainedNode>>,
    pub quantizers: Vec<FeatureSpec>,
    pub class_names: Vec<String>,
    /// `class_alignment[j]` is the class predicted when the final node emits `j`.
    pub class_alignment: Vec<usize>,
    pub beta: f64,
    pub solver: SolverOptions,
    pub seed: u64,
}

impl DINModel {
    pub fn node(&self, layer: usize, position: usize) -> &TrainedNode {
        &self.nodes[layer][position]
    }

    pub fn n_class(&self) -> usize {
        self.topology.n_class()
    }

    pub fn validate(&self) -> Result<()> {
        self.topology.validate()?;
        let bad = |m: String| Err(Error::Validation(format!("model: {m}")));
        if self.nodes.len() != self.topology.layers.len() {
            return bad("layer count differs from topology".into());
        }
        for (l, (nodes, layer)) in self.nodes.iter().zip(&self.topology.layers).enumerate() {
            if nodes.len() != layer.nodes.len() {
                return bad(format!("layer {l}: node count differs from topology"));
            }
            for (k, (node, shape)) in nodes.iter().zip(&layer.nodes).enumerate() {
                let dims = (node.channel.rows(), node.channel.cols());
                if dims != (shape.n_in, shape.n_out) || (node.n_in, node.n_out) != dims {
                    return bad(format!("node ({l}, {k}): channel is {}x{}", dims.0, dims.1));
                }
            }
        }
        if self.quantizers.len() != self.topology.n_features() {
            return bad("quantizer count differs from feature count".into());
        }
        for (spec, card) in self.quantizers.iter().zip(self.topology.feature_cardinalities()) {
            if spec.cardinality() != card {
                return bad(format!(
                    "quantizer '{}' has {} symbols, node expects {card}",
                    spec.name,
                    spec.cardinality()
                ));
            }
        }
        let n_class = self.n_class();
        let mut seen = vec![false; n_class];
        if self.class_alignment.len() != n_class {
            return bad("class alignment has the wrong length".into());
        }
        for &c in &self.class_alignment {
            if c >= n_class || seen[c] {
                return bad("class alignment is not a permutation".into());
            }
            seen[c] = true;
        }
        if self.class_names.len() != n_class {
            return bad("class names do not match n_class".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub beta: f64,
    pub solver: SolverOptions,
    pub seed: u64,
    #[serde(default)]
    pub execution: Execution,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 5.0,
            solver: SolverOptions::default(),
            seed: 0,
            execution: Execution::default(),
        }
    }
}

/// Cumulative row sums of a channel for inverse-CDF sampling.
struct Sampler {
    cols: usize,
    cdf: Vec<f64>,
}

impl Sampler {
    fn new(channel: &ConditionalMatrix) -> Self {
        let cols = channel.cols();
        let mut cdf = Vec::with_capacity(channel.data().len());
        for row in channel.row_iter() {
            let mut acc = 0.0;
            cdf.extend(row.iter().map(|p| {
                acc += p;
                acc
            }));
        }
        Self { cols, cdf }
    }

    fn draw(&self, input: usize, rng: &mut StreamRng) -> usize {
        let row = &self.cdf[input * self.cols..(input + 1) * self.cols];
        let u = rng.gen::<f64>() * row[self.cols - 1];
        row.iter().position(|&c| u < c).unwrap_or_else(|| {
            // u landed on the top edge; take the last column with mass
            let mut j = self.cols - 1;
            while j > 0 && row[j] == row[j - 1] {
                j -= 1;
            }
            j
        })
    }

    fn sample(&self, inputs: &[usize], rng: &mut StreamRng) -> Vec<usize> {
        inputs.iter().map(|&i| self.draw(i, rng)).collect()
    }
}

/// Samples `x_out` for every entry of `x_in` from a node channel.
pub fn sample_channel(
    channel: &ConditionalMatrix,
    inputs: &[usize],
    rng: &mut StreamRng,
) -> Result<Vec<usize>> {
    if let Some(&bad) = inputs.iter().find(|&&i| i >= channel.rows()) {
        return Err(Error::validation(format!(
            "input symbol {bad} not below channel rows {}",
            channel.rows()
        )));
    }
    Ok(Sampler::new(channel).sample(inputs, rng))
}

fn multiplex_layer(topology: &Topology, layer: usize, outputs: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    topology.layers[layer]
        .groups
        .iter()
        .enumerate()
        .map(|(k, g)| {
            let inputs: Vec<&[usize]> = g.iter().map(|&m| outputs[m].as_slice()).collect();
            mux_combine(&inputs, &topology.radices(layer, k))
        })
        .collect()
}

/// Picks the class for each final-node symbol: argmax of `p(y | x_out = j)`
/// (ties to the smaller class). If that is not a bijection, the bijection
/// with the highest expected accuracy `Σ_j p(j)·p(π(j) | j)` is used instead.
pub fn align_classes(py_given_out: &ConditionalMatrix, p_out: &DiscreteDistribution) -> Vec<usize> {
    let n = py_given_out.rows();
    let argmax: Vec<usize> = py_given_out
        .row_iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |best, (m, &p)| if p > best.1 { (m, p) } else { best },
                )
                .0
        })
        .collect();
    let mut seen = vec![false; py_given_out.cols()];
    if argmax.iter().all(|&c| !std::mem::replace(&mut seen[c], true)) && n == py_given_out.cols() {
        return argmax;
    }
    let score = |perm: &[usize]| -> f64 {
        perm.iter()
            .enumerate()
            .map(|(j, &c)| p_out.probs()[j] * py_given_out.get(j, c))
            .sum()
    };
    if n <= 8 {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut best = (perm.clone(), score(&perm));
        // lexicographic enumeration so ties keep the smallest permutation
        while next_permutation(&mut perm) {
            let s = score(&perm);
            if s > best.1 + 1e-15 {
                best = (perm.clone(), s);
            }
        }
        best.0
    } else {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| p_out.probs()[b].total_cmp(&p_out.probs()[a]));
        let mut used = vec![false; n];
        let mut perm = vec![0; n];
        for j in order {
            let c = (0..n)
                .filter(|&c| !used[c])
                .fold((n, f64::NEG_INFINITY), |best, c| {
                    let p = py_given_out.get(j, c);
                    if p > best.1 {
                        (c, p)
                    } else {
                        best
                    }
                })
                .0;
            used[c] = true;
            perm[j] = c;
        }
        perm
    }
}

fn next_permutation(v: &mut [usize]) -> bool {
    let Some(i) = v.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = v.iter().rposition(|&x| x > v[i]).expect("pivot has a successor");
    v.swap(i, j);
    v[i + 1..].reverse();
    true
}

struct NodeResult {
    node: TrainedNode,
    sampled: Vec<usize>,
    py_given_out: ConditionalMatrix,
    p_out: DiscreteDistribution,
}

fn train_node(
    inputs: &[usize],
    labels: &[usize],
    shape: NodeShape,
    n_class: usize,
    config: &TrainConfig,
    layer: usize,
    position: usize,
) -> Result<NodeResult> {
    let (px, py) = estimate_empirical(inputs, labels, shape.n_in, n_class)?;
    let problem = IBProblem::new(px, py, config.beta, shape.n_out)?;
    let ib_seed = derive_seed(config.seed, &[TAG_IB_INIT, layer as u64, position as u64]);
    let sol = solve_ib(&problem, config.solver, ib_seed)?;
    if !sol.diagnostics.converged {
        log::debug!(
            "node ({layer}, {position}) did not converge in {} iterations",
            sol.diagnostics.iterations
        );
    }
    let mut rng = stream(config.seed, &[TAG_TRAIN_SAMPLE, layer as u64, position as u64]);
    let sampled = Sampler::new(&sol.channel).sample(inputs, &mut rng);
    Ok(NodeResult {
        node: TrainedNode {
            n_in: shape.n_in,
            n_out: shape.n_out,
            mi_in_y: problem.relevance(),
            mi_out_y: sol.diagnostics.i_y_out,
            diagnostics: sol.diagnostics,
            channel: sol.channel,
        },
        sampled,
        py_given_out: sol.py_given_out,
        p_out: sol.p_out,
    })
}

/// Trains every node, layer by layer.
pub fn train_network(data: &QuantizedDataset, topology: &Topology, config: &TrainConfig) -> Result<DINModel> {
    data.validate()?;
    topology.validate()?;
    if data.n_features() != topology.n_features() {
        return Err(Error::Schema(format!(
            "dataset has {} features, topology expects {}",
            data.n_features(),
            topology.n_features()
        )));
    }
    if data.cardinalities != topology.feature_cardinalities() {
        return Err(Error::Schema(
            "feature cardinalities differ from the topology's layer 0".into(),
        ));
    }
    if data.n_class != topology.n_class() {
        return Err(Error::Schema(format!(
            "dataset has {} classes, topology's final node has {} outputs",
            data.n_class,
            topology.n_class()
        )));
    }

    let mut inputs = data.columns.clone();
    let mut nodes = Vec::with_capacity(topology.layers.len());
    let mut final_stats = None;
    for (l, layer) in topology.layers.iter().enumerate() {
        if l > 0 {
            inputs = multiplex_layer(topology, l, &inputs)?;
        }
        let results = config.execution.try_map(layer.nodes.len(), |k| {
            train_node(
                &inputs[k],
                &data.labels,
                layer.nodes[k],
                data.n_class,
                config,
                l,
                k,
            )
        })?;
        let mut layer_nodes = Vec::with_capacity(results.len());
        let mut outputs = Vec::with_capacity(results.len());
        for r in results {
            final_stats = Some((r.py_given_out, r.p_out));
            layer_nodes.push(r.node);
            outputs.push(r.sampled);
        }
        nodes.push(layer_nodes);
        inputs = outputs;
    }
    let (py_given_out, p_out) = final_stats.expect("topology has at least one node");
    let model = DINModel {
        topology: topology.clone(),
        nodes,
        quantizers: data.specs.clone(),
        class_names: data.class_names.clone(),
        class_alignment: align_classes(&py_given_out, &p_out),
        beta: config.beta,
        solver: config.solver,
        seed: config.seed,
    };
    model.validate()?;
    Ok(model)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum PredictMode {
    /// One stochastic pass through the network.
    Stochastic { seed: u64 },
    /// `repeats` stochastic passes with a per-row majority vote; pass 0 is
    /// identical to `Stochastic { seed }`.
    Ensemble { seed: u64, repeats: usize },
}

/// Node inputs and sampled outputs of one stochastic pass.
#[derive(Debug, Clone)]
pub struct Propagation {
    /// `inputs[layer][position]`
    pub inputs: Vec<Vec<Vec<usize>>>,
    pub outputs: Vec<Vec<Vec<usize>>>,
}

fn check_columns(model: &DINModel, columns: &[Vec<usize>]) -> Result<usize> {
    let cards = model.topology.feature_cardinalities();
    if columns.len() != cards.len() {
        return Err(Error::Schema(format!(
            "expected {} feature columns, got {}",
            cards.len(),
            columns.len()
        )));
    }
    let n = columns.first().map_or(0, Vec::len);
    for (k, (col, &card)) in columns.iter().zip(&cards).enumerate() {
        if col.len() != n {
            return Err(Error::Schema(format!(
                "column {k} has {} rows, expected {n}",
                col.len()
            )));
        }
        if let Some(s) = col.iter().find(|&&s| s >= card) {
            return Err(Error::Schema(format!(
                "column '{}': symbol {s} not below {card}",
                model.quantizers[k].name
            )));
        }
    }
    Ok(n)
}

/// One stochastic pass; node `(l, k)` draws from stream
/// `(seed, TAG, pass, l, k)`.
pub fn propagate(
    model: &DINModel,
    columns: &[Vec<usize>],
    seed: u64,
    stream_tag: u64,
    pass: u64,
    execution: Execution,
) -> Result<Propagation> {
    check_columns(model, columns)?;
    let topo = &model.topology;
    let mut all_inputs = Vec::with_capacity(topo.layers.len());
    let mut all_outputs: Vec<Vec<Vec<usize>>> = Vec::with_capacity(topo.layers.len());
    let mut current = columns.to_vec();
    for (l, layer) in topo.layers.iter().enumerate() {
        if l > 0 {
            current = multiplex_layer(topo, l, all_outputs.last().expect("previous layer"))?;
        }
        let outputs = execution.map(layer.nodes.len(), |k| {
            let mut rng = stream(seed, &[stream_tag, pass, l as u64, k as u64]);
            Sampler::new(&model.nodes[l][k].channel).sample(&current[k], &mut rng)
        });
        all_inputs.push(std::mem::take(&mut current));
        all_outputs.push(outputs);
    }
    Ok(Propagation {
        inputs: all_inputs,
        outputs: all_outputs,
    })
}

/// Predicts class indices for pre-quantized feature columns.
pub fn predict_symbols(
    model: &DINModel,
    columns: &[Vec<usize>],
    mode: PredictMode,
    execution: Execution,
) -> Result<Vec<usize>> {
    let n_class = model.n_class();
    let depth = model.topology.depth();
    let pass = |seed: u64, p: u64| -> Result<Vec<usize>> {
        let prop = propagate(model, columns, seed, TAG_PREDICT, p, execution)?;
        Ok(prop.outputs[depth][0]
            .iter()
            .map(|&j| model.class_alignment[j])
            .collect())
    };
    match mode {
        PredictMode::Stochastic { seed } => pass(seed, 0),
        PredictMode::Ensemble { seed, repeats } => {
            if repeats == 0 {
                return Err(Error::Config(
                    "ensemble prediction needs at least one repeat".into(),
                ));
            }
            let n = check_columns(model, columns)?;
            let mut votes = vec![0u32; n * n_class];
            for p in 0..repeats {
                for (r, c) in pass(seed, p as u64)?.into_iter().enumerate() {
                    votes[r * n_class + c] += 1;
                }
            }
            Ok(votes
                .chunks_exact(n_class)
                .map(|v| {
                    v.iter()
                        .enumerate()
                        .fold((0, 0), |best, (c, &k)| if k > best.1 { (c, k) } else { best })
                        .0
                })
                .collect())
        }
    }
}

/// Quantizes raw rows with the model's fitted specs, matching columns by
/// feature name.
pub fn quantize_for_model(model: &DINModel, raw: &RawDataset) -> Result<Vec<Vec<usize>>> {
    model
        .quantizers
        .iter()
        .map(|spec| {
            let k = raw
                .feature_names
                .iter()
                .position(|n| *n == spec.name)
                .ok_or_else(|| {
                    Error::Schema(format!("column '{}' required by the model is missing", spec.name))
                })?;
            crate::quantizer::apply_quantizer(spec, &raw.features[k])
        })
        .collect()
}

/// Predicts class indices (into `model.class_names`) for raw rows.
pub fn predict(
    model: &DINModel,
    raw: &RawDataset,
    mode: PredictMode,
    execution: Execution,
) -> Result<Vec<usize>> {
    let columns = quantize_for_model(model, raw)?;
    predict_symbols(model, &columns, mode, execution)
}
