//! Per-step training loss and the teacher-forced example pass.
//!
//! The node loss is the negative log of the mixture probability of the
//! gold label (floored at 1e-12); the edge loss is mean binary
//! cross-entropy over every `(existing node, direction)` cell, skipped
//! entirely at the `EOS` step. A step's total is `node + edge` (unit
//! weighting).
//!
//! Two equivalent routes compute an example's step losses: the training
//! route encodes the final node sequence once and reuses causal prefixes,
//! while the sequential route re-encodes the growing prefix each step.
//! With dropout off they agree exactly; a test pins that equivalence.

use graft_core::{canonical_labels, ActionSequence, Direction, ExpansionAction, SceneGraph};
use graft_tensor::{Scalar, Tape, Tensor, Var};

use crate::error::ModelError;
use crate::net::{EdgePrediction, Model, NodeDistribution};

/// Probability floor inside the logs.
pub const PROB_FLOOR: f64 = 1e-12;

/// Loss for one expansion step. `edges` must be `Some` exactly when the
/// step is a non-EOS action over a non-empty graph.
pub fn step_loss<S: Scalar>(
    model: &Model<S>,
    tape: &mut Tape<S>,
    edges: Option<&EdgePrediction>,
    nodes: &NodeDistribution,
    gold: &ExpansionAction,
) -> Result<Var, ModelError> {
    let gold_prob = nodes.prob_of(tape, &model.vocab, gold.label())?;
    let log_p = tape.ln_floor(gold_prob, PROB_FLOOR)?;
    let node_loss = tape.scale(log_p, -1.0)?;

    let Some(edges) = edges else {
        return Ok(node_loss);
    };
    let m = tape.get(edges.out_probs).cols();
    let mut gold_out = Tensor::<S>::zeros(1, m);
    let mut gold_in = Tensor::<S>::zeros(1, m);
    for attachment in gold.attachments() {
        let cell = match attachment.direction {
            Direction::Out => &mut gold_out,
            Direction::In => &mut gold_in,
        };
        cell.set(0, attachment.target, S::one());
    }
    let probs = tape.concat(&[edges.out_probs, edges.in_probs], 0)?;
    let mut gold_cells = Tensor::zeros(2, m);
    for c in 0..m {
        gold_cells.set(0, c, gold_out.at(0, c));
        gold_cells.set(1, c, gold_in.at(0, c));
    }
    let inverse_cells = gold_cells.map(|g| S::one() - g);
    let g = tape.value(gold_cells);
    let g_inv = tape.value(inverse_cells);

    let log_p = tape.ln_floor(probs, PROB_FLOOR)?;
    let hit = tape.mul(log_p, g)?;
    let one_minus = tape.sub_from(1.0, probs)?;
    let log_q = tape.ln_floor(one_minus, PROB_FLOOR)?;
    let miss = tape.mul(log_q, g_inv)?;
    let both = tape.add(hit, miss)?;
    let mean = tape.mean(both)?;
    let edge_loss = tape.scale(mean, -1.0)?;

    Ok(tape.add(node_loss, edge_loss)?)
}

/// Expansion-time node labels after every non-EOS action of the sequence.
pub fn full_node_sequence(source: &SceneGraph, actions: &ActionSequence) -> Vec<String> {
    let mut labels = canonical_labels(source);
    for action in actions.actions() {
        if !action.is_eos() {
            labels.push(action.label().to_string());
        }
    }
    labels
}

/// Teacher-forced per-step losses, encoding the full node sequence once
/// and slicing causal prefixes (the training route).
pub fn example_step_losses<S: Scalar>(
    model: &Model<S>,
    tape: &mut Tape<S>,
    source: &SceneGraph,
    query: &[String],
    actions: &ActionSequence,
    train: bool,
) -> Result<Vec<Var>, ModelError> {
    let x = model.encode_query(tape, query, train)?;
    let labels = full_node_sequence(source, actions);
    let full = model.encode_graph(tape, &labels, train)?;
    let base = source.node_count();

    let mut h = model.initial_state(tape, &x)?;
    let mut losses = Vec::with_capacity(actions.len());
    for (t, action) in actions.actions().iter().enumerate() {
        let m = base + t;
        let prefix = crate::net::GraphEncoding {
            var: tape.slice(full.var, 0, 0, m)?,
            len: m,
        };
        let fused = model.fuse(tape, h, &x, &prefix, train)?;
        let edges = if m > 0 && !action.is_eos() {
            Some(model.predict_edges(tape, fused, &prefix)?)
        } else {
            None
        };
        let after_edges = model.update_state_after_edges(tape, fused, &prefix, train)?;
        let nodes = model.predict_node(tape, after_edges, &x, query)?;
        losses.push(step_loss(model, tape, edges.as_ref(), &nodes, action)?);
        h = model.update_state_after_node(tape, after_edges, &x, train)?;
    }
    Ok(losses)
}

/// Same losses, re-encoding the graph prefix from scratch at every step
/// (the reference route for the equivalence check).
pub fn example_step_losses_sequential<S: Scalar>(
    model: &Model<S>,
    tape: &mut Tape<S>,
    source: &SceneGraph,
    query: &[String],
    actions: &ActionSequence,
) -> Result<Vec<Var>, ModelError> {
    let x = model.encode_query(tape, query, false)?;
    let labels = full_node_sequence(source, actions);
    let base = source.node_count();

    let mut h = model.initial_state(tape, &x)?;
    let mut losses = Vec::with_capacity(actions.len());
    for (t, action) in actions.actions().iter().enumerate() {
        let m = base + t;
        let prefix = model.encode_graph(tape, &labels[..m], false)?;
        let fused = model.fuse(tape, h, &x, &prefix, false)?;
        let edges = if m > 0 && !action.is_eos() {
            Some(model.predict_edges(tape, fused, &prefix)?)
        } else {
            None
        };
        let after_edges = model.update_state_after_edges(tape, fused, &prefix, false)?;
        let nodes = model.predict_node(tape, after_edges, &x, query)?;
        losses.push(step_loss(model, tape, edges.as_ref(), &nodes, action)?);
        h = model.update_state_after_node(tape, after_edges, &x, false)?;
    }
    Ok(losses)
}

/// Sum of the step losses as one differentiable scalar.
pub fn example_loss<S: Scalar>(
    model: &Model<S>,
    tape: &mut Tape<S>,
    source: &SceneGraph,
    query: &[String],
    actions: &ActionSequence,
    train: bool,
) -> Result<Var, ModelError> {
    let losses = example_step_losses(model, tape, source, query, actions, train)?;
    let mut total = losses[0];
    for &l in &losses[1..] {
        total = tape.add(total, l)?;
    }
    Ok(total)
}
