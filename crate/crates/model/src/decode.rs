//! Greedy incremental decoding.
//!
//! Loop: fuse -> edge probabilities over the current node sequence (cells
//! above 0.5 become attachments) -> greedy node pick from the mixture ->
//! append -> stop at `EOS` or the step cap. A decoded `DELETE` keeps only
//! its single best outgoing attachment onto a non-dummy node. The
//! extended graph then reduces (dummies take their victims and incident
//! edges with them) and `UNK`-labeled nodes are dropped.

use std::collections::BTreeSet;

use graft_core::{canonical_labels, graph::is_valid_label, Rng, SceneGraph, Triple, DELETE_TOKEN, EOS_TOKEN, UNK_TOKEN};
use graft_tensor::{Scalar, Tape};

use crate::error::ModelError;
use crate::net::Model;

pub const DEFAULT_MAX_STEPS: usize = 64;
/// Attachment cells above this probability become edges.
pub const EDGE_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone)]
struct DecodedNode {
    label: String,
    dummy: bool,
}

/// Decodes one example. Always terminates within `max_steps` expansion
/// steps.
pub fn decode<S: Scalar>(
    model: &Model<S>,
    source: &SceneGraph,
    query: &[String],
    max_steps: usize,
) -> Result<SceneGraph, ModelError> {
    let mut tape = Tape::no_grad();
    let x = model.encode_query(&mut tape, query, false)?;
    let mut h = model.initial_state(&mut tape, &x)?;

    let mut nodes: Vec<DecodedNode> = canonical_labels(source)
        .into_iter()
        .map(|label| DecodedNode {
            label,
            dummy: false,
        })
        .collect();
    let base = source.node_count();
    let mut canon_pos = vec![0usize; base];
    for (i, id) in source.canonical_order().into_iter().enumerate() {
        canon_pos[id.index()] = i;
    }
    let mut edges: Vec<(usize, usize)> = source
        .edges()
        .map(|e| (canon_pos[e.head.index()], canon_pos[e.tail.index()]))
        .collect();

    for _ in 0..max_steps {
        let labels: Vec<String> = nodes.iter().map(|n| n.label.clone()).collect();
        let graph = model.encode_graph(&mut tape, &labels, false)?;
        let fused = model.fuse(&mut tape, h, &x, &graph, false)?;
        let edge_pred = if graph.len > 0 {
            Some(model.predict_edges(&mut tape, fused, &graph)?)
        } else {
            None
        };
        let after_edges = model.update_state_after_edges(&mut tape, fused, &graph, false)?;
        let dist = model.predict_node(&mut tape, after_edges, &x, query)?;
        let label = dist.argmax(&tape, &model.vocab);
        h = model.update_state_after_node(&mut tape, after_edges, &x, false)?;

        if label == EOS_TOKEN {
            break;
        }
        let new_index = nodes.len();
        if label == DELETE_TOKEN {
            // single best outgoing attachment onto a non-dummy victim
            let Some(pred) = &edge_pred else { continue };
            let out = tape.get(pred.out_probs);
            let victim = (0..nodes.len())
                .filter(|&j| !nodes[j].dummy)
                .max_by(|&a, &b| {
                    out.at(0, a)
                        .partial_cmp(&out.at(0, b))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(&a))
                });
            let Some(victim) = victim else { continue };
            nodes.push(DecodedNode {
                label: DELETE_TOKEN.to_string(),
                dummy: true,
            });
            edges.push((new_index, victim));
        } else {
            let label = sanitize_label(&label);
            if let Some(pred) = &edge_pred {
                let out = tape.get(pred.out_probs);
                let inp = tape.get(pred.in_probs);
                let threshold = S::lit(EDGE_THRESHOLD);
                for j in 0..nodes.len() {
                    if out.at(0, j) > threshold {
                        edges.push((new_index, j));
                    }
                    if inp.at(0, j) > threshold {
                        edges.push((j, new_index));
                    }
                }
            }
            nodes.push(DecodedNode {
                label,
                dummy: false,
            });
        }
    }

    Ok(materialize(&nodes, &edges))
}

/// Copied surface forms may carry arbitrary characters; anything that is
/// not a legal node label becomes `UNK` and is removed in postprocessing.
fn sanitize_label(raw: &str) -> String {
    let lowered = raw.to_lowercase();
    if is_valid_label(&lowered) {
        lowered
    } else {
        UNK_TOKEN.to_string()
    }
}

/// Reduces the decoded extended graph: dummies, their victims, incident
/// edges, and `UNK` nodes all vanish; the rest re-densifies in order.
fn materialize(nodes: &[DecodedNode], edges: &[(usize, usize)]) -> SceneGraph {
    let mut doomed: BTreeSet<usize> = BTreeSet::new();
    for (i, n) in nodes.iter().enumerate() {
        if n.dummy || n.label == UNK_TOKEN {
            doomed.insert(i);
        }
        if n.dummy {
            for &(h, t) in edges {
                if h == i {
                    doomed.insert(t);
                }
            }
        }
    }
    let mut remap = vec![usize::MAX; nodes.len()];
    let mut graph = SceneGraph::new();
    for (i, n) in nodes.iter().enumerate() {
        if !doomed.contains(&i) {
            remap[i] = graph
                .add_node(&n.label)
                .expect("surviving decoded labels are valid")
                .index();
        }
    }
    for &(h, t) in edges {
        if h != t && !doomed.contains(&h) && !doomed.contains(&t) {
            graph
                .add_edge(graft_core::NodeId(remap[h]), graft_core::NodeId(remap[t]))
                .expect("remapped edges are in range");
        }
    }
    graph
}

/// Decodes a whole split, optionally across threads. Output order matches
/// input order regardless of the thread count.
pub fn decode_all<S: Scalar>(
    model: &Model<S>,
    triples: &[Triple],
    max_steps: usize,
    threads: usize,
) -> Result<Vec<SceneGraph>, ModelError> {
    crate::parallel::map_indexed(triples, threads, |_, t| {
        decode(model, &t.source, &t.query, max_steps)
    })
    .into_iter()
    .collect()
}

/// Deterministic subsample used by the training-fraction sweep: a seeded
/// shuffle decides membership, then the original order is restored.
pub fn subsample_fraction<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Vec<T> {
    assert!((0.0..=1.0).contains(&fraction), "fraction out of range");
    let keep = ((items.len() as f64) * fraction).ceil() as usize;
    let keep = keep.clamp(1.min(items.len()), items.len());
    let mut order: Vec<usize> = (0..items.len()).collect();
    Rng::derive(seed, &[0xF0AC]).shuffle(&mut order);
    let mut chosen: Vec<usize> = order.into_iter().take(keep).collect();
    chosen.sort();
    chosen.into_iter().map(|i| items[i].clone()).collect()
}
