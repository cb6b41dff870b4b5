//! Node-level F1, edge-level F1, and exact-match graph accuracy.
//!
//! Nodes match as a label multiset. Edges match as a multiset of
//! `(head tag, tail tag)` pairs, where tags carry the canonical
//! occurrence index (`label#k`) so duplicate labels stay well-defined.
//! Graph accuracy is byte equality of canonical serializations.

use graft_core::{SceneGraph, Triple};

use crate::error::ModelError;

fn f1_from_counts(tp: usize, pred_total: usize, gold_total: usize) -> f64 {
    if pred_total == 0 && gold_total == 0 {
        return 1.0;
    }
    if tp == 0 {
        return 0.0;
    }
    let p = tp as f64 / pred_total as f64;
    let r = tp as f64 / gold_total as f64;
    2.0 * p * r / (p + r)
}

fn multiset_f1<T: Ord>(pred: Vec<T>, gold: Vec<T>) -> f64 {
    use std::collections::BTreeMap;
    let count = |items: Vec<T>| {
        let mut m: BTreeMap<T, usize> = BTreeMap::new();
        for x in items {
            *m.entry(x).or_insert(0) += 1;
        }
        m
    };
    let (p, g) = (count(pred), count(gold));
    let tp: usize = p
        .iter()
        .map(|(k, &c)| c.min(g.get(k).copied().unwrap_or(0)))
        .sum();
    f1_from_counts(
        tp,
        p.values().sum::<usize>(),
        g.values().sum::<usize>(),
    )
}

/// Multiset F1 over node labels. Two empty graphs score 1.0.
pub fn node_f1(pred: &SceneGraph, gold: &SceneGraph) -> f64 {
    multiset_f1(
        pred.labels().map(str::to_string).collect(),
        gold.labels().map(str::to_string).collect(),
    )
}

fn tagged_edges(g: &SceneGraph) -> Vec<(String, String)> {
    let tags = g.occurrence_tags();
    g.edges()
        .map(|e| (tags[e.head.index()].clone(), tags[e.tail.index()].clone()))
        .collect()
}

/// Multiset F1 over directed occurrence-tagged edges. Two edgeless graphs
/// score 1.0.
pub fn edge_f1(pred: &SceneGraph, gold: &SceneGraph) -> f64 {
    multiset_f1(tagged_edges(pred), tagged_edges(gold))
}

/// Fraction of exact canonical-form matches.
pub fn graph_accuracy(preds: &[SceneGraph], golds: &[SceneGraph]) -> Result<f64, ModelError> {
    if preds.len() != golds.len() {
        return Err(ModelError::LengthMismatch {
            preds: preds.len(),
            golds: golds.len(),
        });
    }
    if preds.is_empty() {
        return Ok(1.0);
    }
    let hits = preds
        .iter()
        .zip(golds)
        .filter(|(p, g)| p.canonical_serialize() == g.canonical_serialize())
        .count();
    Ok(hits as f64 / preds.len() as f64)
}

/// Per-example scores kept around for bucketed analyses.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    pub node_f1: f64,
    pub edge_f1: f64,
    pub exact: bool,
    pub query_len: usize,
    pub target_size: usize,
}

/// Aggregated metrics (macro averages) plus the per-example records.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub node_f1: f64,
    pub edge_f1: f64,
    pub graph_acc: f64,
    pub examples: Vec<ExampleRecord>,
}

impl MetricsReport {
    pub fn from_pairs(
        preds: &[SceneGraph],
        triples: &[Triple],
    ) -> Result<Self, ModelError> {
        if preds.len() != triples.len() {
            return Err(ModelError::LengthMismatch {
                preds: preds.len(),
                golds: triples.len(),
            });
        }
        let examples: Vec<ExampleRecord> = preds
            .iter()
            .zip(triples)
            .map(|(p, t)| ExampleRecord {
                node_f1: node_f1(p, &t.target),
                edge_f1: edge_f1(p, &t.target),
                exact: p.canonical_serialize() == t.target.canonical_serialize(),
                query_len: t.query.len(),
                target_size: t.target.node_count(),
            })
            .collect();
        Ok(Self::from_records(examples))
    }

    pub fn from_records(examples: Vec<ExampleRecord>) -> Self {
        let n = examples.len().max(1) as f64;
        let node_f1 = examples.iter().map(|e| e.node_f1).sum::<f64>() / n;
        let edge_f1 = examples.iter().map(|e| e.edge_f1).sum::<f64>() / n;
        let graph_acc = examples.iter().filter(|e| e.exact).count() as f64 / n;
        Self {
            node_f1,
            edge_f1,
            graph_acc,
            examples,
        }
    }

    /// One-line machine-readable summary.
    pub fn machine_line(&self, tag: &str) -> String {
        format!(
            "metrics {tag} node_f1={:.4} edge_f1={:.4} graph_acc={:.4} n={}",
            self.node_f1,
            self.edge_f1,
            self.graph_acc,
            self.examples.len()
        )
    }
}

/// The copy-the-source baseline: predicts `target = source` everywhere.
/// Its scores lower-bound what a trained model should reach.
pub fn copy_graph_baseline(triples: &[Triple]) -> MetricsReport {
    let preds: Vec<SceneGraph> = triples.iter().map(|t| t.source.clone()).collect();
    MetricsReport::from_pairs(&preds, triples).expect("lengths match by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn graph(labels: &[&str], edges: &[(usize, usize)]) -> SceneGraph {
        SceneGraph::from_parts(labels.iter().copied(), edges.iter().copied()).unwrap()
    }

    #[test]
    fn node_f1_two_thirds_on_one_substitution() {
        let pred = graph(&["girl", "racket", "holding"], &[]);
        let gold = graph(&["boy", "racket", "holding"], &[]);
        assert_relative_eq!(node_f1(&pred, &gold), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn node_f1_boundary_cases() {
        let a = graph(&["x"], &[]);
        let empty = SceneGraph::new();
        assert_eq!(node_f1(&a, &a), 1.0);
        assert_eq!(node_f1(&empty, &empty), 1.0);
        assert_eq!(node_f1(&a, &empty), 0.0);
        let b = graph(&["y"], &[]);
        assert_eq!(node_f1(&a, &b), 0.0);
    }

    #[test]
    fn edge_f1_half_on_one_reversed_edge() {
        let pred = graph(&["a", "b", "c"], &[(0, 1), (2, 1)]);
        let gold = graph(&["a", "b", "c"], &[(0, 1), (1, 2)]);
        assert_relative_eq!(edge_f1(&pred, &gold), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn edge_f1_vacuous_match_on_edgeless_graphs() {
        let a = graph(&["a", "b"], &[]);
        let b = graph(&["c", "d"], &[]);
        assert_eq!(edge_f1(&a, &b), 1.0);
    }

    #[test]
    fn graph_accuracy_counts_canonical_matches() {
        let a = graph(&["boy", "holding"], &[(0, 1)]);
        let b = graph(&["holding", "boy"], &[(1, 0)]);
        let c = graph(&["girl", "holding"], &[(0, 1)]);
        // permuted ids, same canonical form
        assert_eq!(graph_accuracy(&[b.clone()], &[a.clone()]).unwrap(), 1.0);
        assert_eq!(
            graph_accuracy(&[a.clone(), c.clone()], &[a.clone(), a.clone()]).unwrap(),
            0.5
        );
        assert!(graph_accuracy(&[a], &[]).is_err());
    }

    #[test]
    fn exact_match_implies_perfect_f1() {
        let g = graph(&["a", "b", "rel"], &[(0, 2), (2, 1)]);
        let record = ExampleRecord {
            node_f1: node_f1(&g, &g),
            edge_f1: edge_f1(&g, &g),
            exact: true,
            query_len: 3,
            target_size: 3,
        };
        assert_eq!(record.node_f1, 1.0);
        assert_eq!(record.edge_f1, 1.0);
    }

    #[test]
    fn copy_baseline_scores_noop_and_modified() {
        let src = graph(&["a", "b"], &[(0, 1)]);
        let noop = Triple {
            source: src.clone(),
            query: vec!["keep".into()],
            target: src.clone(),
        };
        let changed = Triple {
            source: src.clone(),
            query: vec!["change".into()],
            target: graph(&["a", "c"], &[(0, 1)]),
        };
        assert_eq!(copy_graph_baseline(&[noop.clone()]).graph_acc, 1.0);
        assert_eq!(copy_graph_baseline(&[changed.clone()]).graph_acc, 0.0);
        let mixed = copy_graph_baseline(&[noop, changed]);
        assert_eq!(mixed.graph_acc, 0.5);
    }
}
