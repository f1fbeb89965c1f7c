//! End-to-end channel composition and information-flow diagnostics.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::dataio::RawDataset;
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::infotheory::{empirical_entropy, empirical_mutual_information, ConditionalMatrix};
use crate::network::{propagate, quantize_for_model, DINModel};
use crate::quantizer::{FeatureSpec, QuantizedDataset};
use crate::rng::TAG_MI_FLOW;

/// Default limit on joint input symbols for [`compose_full_matrix`].
pub const DEFAULT_STATE_CAP: usize = 1 << 20;

/// Number of joint input symbols, `Π` of the feature cardinalities.
pub fn joint_input_size(model: &DINModel) -> u128 {
    model
        .topology
        .feature_cardinalities()
        .iter()
        .map(|&c| c as u128)
        .try_fold(1u128, |a, c| a.checked_mul(c))
        .unwrap_or(u128::MAX)
}

fn composed_channel(model: &DINModel, layer: usize, position: usize) -> Result<ConditionalMatrix> {
    let node = &model.nodes[layer][position].channel;
    if layer == 0 {
        return Ok(node.clone());
    }
    let children = model.topology.layers[layer].groups[position]
        .iter()
        .map(|&m| composed_channel(model, layer - 1, m))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&ConditionalMatrix> = children.iter().collect();
    ConditionalMatrix::kron_mixed_radix(&refs)?.compose(node)
}

/// The network as a single channel from the joint quantized input (features
/// in order, first feature as the lowest mixed-radix digit) to the final
/// node's output symbol.
///
/// Each subtree is `(P_first ⊗ P_second ⊗ …) · P_node`, with the Kronecker
/// factors ordered like the multiplexer digits.
pub fn compose_full_matrix(model: &DINModel, cap: usize) -> Result<ConditionalMatrix> {
    let required = joint_input_size(model);
    if required > cap as u128 {
        return Err(Error::StateSpace { required, cap });
    }
    composed_channel(model, model.topology.depth(), 0)
}

/// Per-node plug-in estimates, in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeFlow {
    pub layer: usize,
    pub position: usize,
    pub mi_in_y: f64,
    pub mi_out_y: f64,
    pub h_out: f64,
}

/// Bounds on the multiplexer output's information about the labels.
///
/// `layer`/`position` identify the node the multiplexer feeds. For arity
/// above two the pairwise bounds are chained:
/// `max_i I(X_i;Y) ≤ I(X_1..X_k;Y) ≤ min_i [I(X_i;Y) + Σ_{j≠i} H(X_j)]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuxFlow {
    pub layer: usize,
    pub position: usize,
    pub members: Vec<usize>,
    pub lower_bound: f64,
    pub observed: f64,
    pub upper_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MIFlowReport {
    pub nodes: Vec<NodeFlow>,
    pub muxes: Vec<MuxFlow>,
}

/// `(lower, upper)` from the members' `I(X_i; Y)` and `H(X_i)`.
pub fn mux_bounds(member_mi: &[f64], member_h: &[f64]) -> (f64, f64) {
    let lower = member_mi.iter().copied().fold(0.0, f64::max);
    let h_total: f64 = member_h.iter().sum();
    let upper = member_mi
        .iter()
        .zip(member_h)
        .map(|(mi, h)| mi + (h_total - h))
        .fold(f64::INFINITY, f64::min);
    (lower, upper)
}

/// Re-runs the training rows through the model (seeded) and measures the
/// information carried at every node and multiplexer.
pub fn mi_flow(
    model: &DINModel,
    data: &QuantizedDataset,
    seed: u64,
    execution: Execution,
) -> Result<MIFlowReport> {
    if data.n_class != model.n_class() {
        return Err(Error::Schema(format!(
            "dataset has {} classes, model has {}",
            data.n_class,
            model.n_class()
        )));
    }
    let prop = propagate(model, &data.columns, seed, TAG_MI_FLOW, 0, execution)?;
    let y = &data.labels;
    let n_class = data.n_class;
    let mut report = MIFlowReport::default();
    let mut index = Vec::with_capacity(model.topology.layers.len());
    for (l, layer) in model.topology.layers.iter().enumerate() {
        let mut layer_idx = Vec::with_capacity(layer.nodes.len());
        for (k, shape) in layer.nodes.iter().enumerate() {
            let x_in = &prop.inputs[l][k];
            let x_out = &prop.outputs[l][k];
            layer_idx.push(report.nodes.len());
            report.nodes.push(NodeFlow {
                layer: l,
                position: k,
                mi_in_y: empirical_mutual_information(x_in, y, shape.n_in, n_class)?,
                mi_out_y: empirical_mutual_information(x_out, y, shape.n_out, n_class)?,
                h_out: empirical_entropy(x_out, shape.n_out)?,
            });
        }
        index.push(layer_idx);
    }
    for (l, layer) in model.topology.layers.iter().enumerate().skip(1) {
        for (k, group) in layer.groups.iter().enumerate() {
            let members: Vec<&NodeFlow> = group.iter().map(|&m| &report.nodes[index[l - 1][m]]).collect();
            let mi: Vec<f64> = members.iter().map(|n| n.mi_out_y).collect();
            let h: Vec<f64> = members.iter().map(|n| n.h_out).collect();
            let (lower_bound, upper_bound) = mux_bounds(&mi, &h);
            report.muxes.push(MuxFlow {
                layer: l,
                position: k,
                members: group.clone(),
                lower_bound,
                observed: report.nodes[index[l][k]].mi_in_y,
                upper_bound,
            });
        }
    }
    Ok(report)
}

/// Encodes raw rows with the model's own quantizers and class list.
pub fn quantize_with_model(model: &DINModel, raw: &RawDataset) -> Result<QuantizedDataset> {
    let columns = quantize_for_model(model, raw)?;
    let labels = raw
        .target
        .iter()
        .map(|t| {
            model
                .class_names
                .iter()
                .position(|c| c == t)
                .ok_or_else(|| Error::Schema(format!("class '{t}' unknown to the model")))
        })
        .collect::<Result<Vec<_>>>()?;
    let data = QuantizedDataset {
        columns,
        cardinalities: model.quantizers.iter().map(FeatureSpec::cardinality).collect(),
        labels,
        n_class: model.n_class(),
        specs: model.quantizers.clone(),
        class_names: model.class_names.clone(),
    };
    data.validate()?;
    Ok(data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundViolation {
    pub layer: usize,
    pub position: usize,
    pub side: BoundSide,
    pub bound: f64,
    pub observed: f64,
}

impl fmt::Display for BoundViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (rel, name) = match self.side {
            BoundSide::Lower => ("<", "lower"),
            BoundSide::Upper => (">", "upper"),
        };
        write!(
            f,
            "mux into node ({}, {}): observed {:.6} {rel} {name} bound {:.6}",
            self.layer, self.position, self.observed, self.bound
        )
    }
}

/// Every multiplexer whose observed information leaves `[lower − tol, upper + tol]`.
pub fn check_bounds(report: &MIFlowReport, tol: f64) -> Vec<BoundViolation> {
    let mut out = Vec::new();
    for m in &report.muxes {
        if m.observed < m.lower_bound - tol {
            out.push(BoundViolation {
                layer: m.layer,
                position: m.position,
                side: BoundSide::Lower,
                bound: m.lower_bound,
                observed: m.observed,
            });
        }
        if m.observed > m.upper_bound + tol {
            out.push(BoundViolation {
                layer: m.layer,
                position: m.position,
                side: BoundSide::Upper,
                bound: m.upper_bound,
                observed: m.observed,
            });
        }
    }
    out
}

/// Largest `I(X_out; Y)` among the nodes of each layer.
pub fn layer_max_output_mi(report: &MIFlowReport) -> Vec<f64> {
    let depth = report.nodes.iter().map(|n| n.layer).max().unwrap_or(0);
    let mut best = vec![0.0f64; depth + 1];
    for n in &report.nodes {
        best[n.layer] = best[n.layer].max(n.mi_out_y);
    }
    best
}

/// Flat CSV, one row per node and per multiplexer. Quantities in bits;
/// cells that do not apply to the row kind are left empty.
pub fn write_mi_flow_csv<W: Write>(report: &MIFlowReport, writer: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Serde(e.to_string());
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "kind",
        "layer",
        "position",
        "mi_in_y",
        "mi_out_y",
        "h_out",
        "lower_bound",
        "observed",
        "upper_bound",
    ])
    .map_err(to_err)?;
    let num = |x: f64| format!("{x}");
    for n in &report.nodes {
        w.write_record([
            "node".to_string(),
            n.layer.to_string(),
            n.position.to_string(),
            num(n.mi_in_y),
            num(n.mi_out_y),
            num(n.h_out),
            String::new(),
            String::new(),
            String::new(),
        ])
        .map_err(to_err)?;
    }
    for m in &report.muxes {
        w.write_record([
            "mux".to_string(),
            m.layer.to_string(),
            m.position.to_string(),
            String::new(),
            String::new(),
            String::new(),
            num(m.lower_bound),
            num(m.observed),
            num(m.upper_bound),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Serde(e.to_string()))
}
