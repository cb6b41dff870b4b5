//! Finite-difference verification of every differentiable block: query
//! and graph encoders, fusion, both edge banks, the state updates, the
//! node decoder, and the full step loss.

mod common;

use common::{model_grad_check, probe_loss, small_dataset, tiny_model};
use graft_core::{canonical_labels, derive_actions};
use graft_model::{example_loss, step_loss};

const TOL: f64 = 1e-4;
const H: f64 = 1e-5;

/// Five seeds, five shapes: dims 8/12/16 with 1/2/4 heads.
fn shapes() -> [(u64, usize, usize); 5] {
    [(1, 8, 2), (2, 12, 2), (3, 16, 4), (4, 8, 1), (5, 12, 4)]
}

#[test]
fn query_encoder_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let query = train[0].query.clone();
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let q = model.encode_query(tape, &query, false)?;
                probe_loss(tape, q.var, seed)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: query encoder grad error {err}");
    }
}

#[test]
fn graph_encoder_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed + 10, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let labels = canonical_labels(&train[0].source);
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let g = model.encode_graph(tape, &labels, false)?;
                probe_loss(tape, g.var, seed)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: graph encoder grad error {err}");
    }
}

#[test]
fn fusion_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed + 20, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let t = train[0].clone();
        let labels = canonical_labels(&t.source);
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let q = model.encode_query(tape, &t.query, false)?;
                let g = model.encode_graph(tape, &labels, false)?;
                let h = model.initial_state(tape, &q)?;
                let fused = model.fuse(tape, h, &q, &g, false)?;
                probe_loss(tape, fused, seed)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: fusion grad error {err}");
    }
}

#[test]
fn edge_bank_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed + 30, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let t = train[0].clone();
        let labels = canonical_labels(&t.source);
        // exercise both direction banks and the max-over-heads reduction
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let q = model.encode_query(tape, &t.query, false)?;
                let g = model.encode_graph(tape, &labels, false)?;
                let h = model.initial_state(tape, &q)?;
                let fused = model.fuse(tape, h, &q, &g, false)?;
                let edges = model.predict_edges(tape, fused, &g)?;
                let both = tape.concat(&[edges.out_probs, edges.in_probs], 0)?;
                let floored = tape.ln_floor(both, 1e-12)?;
                Ok(tape.mean(floored)?)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: edge bank grad error {err}");
    }
}

#[test]
fn state_update_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed + 40, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let t = train[0].clone();
        let labels = canonical_labels(&t.source);
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let q = model.encode_query(tape, &t.query, false)?;
                let g = model.encode_graph(tape, &labels, false)?;
                let h = model.initial_state(tape, &q)?;
                let a = model.update_state_after_edges(tape, h, &g, false)?;
                let b = model.update_state_after_node(tape, a, &q, false)?;
                probe_loss(tape, b, seed)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: state update grad error {err}");
    }
}

#[test]
fn node_decoder_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed + 50, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let t = train[0].clone();
        let gold = t.target.labels().next().unwrap().to_string();
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let q = model.encode_query(tape, &t.query, false)?;
                let h = model.initial_state(tape, &q)?;
                let dist = model.predict_node(tape, h, &q, &t.query)?;
                let p = dist.prob_of(tape, &model.vocab, &gold)?;
                let lp = tape.ln_floor(p, 1e-12)?;
                Ok(tape.scale(lp, -1.0)?)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: node decoder grad error {err}");
    }
}

#[test]
fn full_step_loss_gradients() {
    for (seed, dim, heads) in shapes() {
        let (train, _) = small_dataset(seed + 60, 12, 1);
        let mut model = tiny_model(dim, heads, &train, seed);
        let t = train[0].clone();
        let actions = derive_actions(&t.source, &t.target);
        let first = actions.actions()[0].clone();
        let labels = canonical_labels(&t.source);
        let err = model_grad_check(
            &mut model,
            |tape, model| {
                let q = model.encode_query(tape, &t.query, false)?;
                let g = model.encode_graph(tape, &labels, false)?;
                let h = model.initial_state(tape, &q)?;
                let fused = model.fuse(tape, h, &q, &g, false)?;
                let edges = model.predict_edges(tape, fused, &g)?;
                let after = model.update_state_after_edges(tape, fused, &g, false)?;
                let dist = model.predict_node(tape, after, &q, &t.query)?;
                step_loss(model, tape, Some(&edges), &dist, &first)
            },
            H,
        );
        assert!(err < TOL, "seed {seed}: step loss grad error {err}");
    }
}

#[test]
fn whole_example_loss_gradients() {
    let (train, _) = small_dataset(99, 12, 1);
    let mut model = tiny_model(8, 2, &train, 3);
    let t = train[0].clone();
    let actions = derive_actions(&t.source, &t.target);
    let err = model_grad_check(
        &mut model,
        |tape, model| example_loss(model, tape, &t.source, &t.query, &actions, false),
        H,
    );
    assert!(err < TOL, "whole example grad error {err}");
}

#[test]
fn every_parameter_learns_on_a_batch() {
    // dead-parameter check: after a few examples, every parameter has a
    // nonzero gradient somewhere
    let (train, _) = small_dataset(123, 24, 1);
    let mut model = tiny_model(16, 4, &train, 5);
    let mut zero_names: Vec<String> = Vec::new();
    let mut merged = graft_tensor::Gradients::<f64>::new();
    for t in train.iter().take(12) {
        let actions = derive_actions(&t.source, &t.target);
        let mut tape = graft_tensor::Tape::new();
        let loss = example_loss(&model, &mut tape, &t.source, &t.query, &actions, false).unwrap();
        merged.merge(tape.backward(loss).unwrap());
    }
    for name in model.store.names() {
        let nonzero = merged
            .get(name)
            .map(|g| g.data().iter().any(|&v| v != 0.0))
            .unwrap_or(false);
        if !nonzero {
            zero_names.push(name.clone());
        }
    }
    let _ = &mut model;
    assert!(
        zero_names.is_empty(),
        "parameters with all-zero gradients: {zero_names:?}"
    );
}
