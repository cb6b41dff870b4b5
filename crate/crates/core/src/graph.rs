//! Scene-graph data model.
//!
//! A scene graph is a directed labeled graph: objects, attributes, and
//! relations are all nodes, and edges are unlabeled. Node ids are dense
//! indices into the node list, so a graph with `n` nodes has ids `0..n`.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved label of the dummy node that marks a victim for removal.
pub const DELETE_TOKEN: &str = "DELETE";
/// Reserved label of the end-of-sequence action.
pub const EOS_TOKEN: &str = "EOS";
/// Reserved label standing in for out-of-vocabulary tokens.
pub const UNK_TOKEN: &str = "UNK";
/// Reserved padding label. Never appears in graphs or action sequences.
pub const PAD_TOKEN: &str = "PAD";

/// All labels a [`SceneGraph`] node may never carry.
pub const RESERVED_TOKENS: [&str; 4] = [DELETE_TOKEN, EOS_TOKEN, UNK_TOKEN, PAD_TOKEN];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GraphError {
    #[error("label {0:?} is reserved")]
    ReservedLabel(String),
    #[error("label {0:?} is invalid: labels are non-empty [a-z0-9_] strings")]
    InvalidLabel(String),
    #[error("self-loop on node {0}")]
    SelfLoop(NodeId),
    #[error("unknown node id {0} (graph has {1} nodes)")]
    UnknownNode(NodeId, usize),
}

/// Dense index of a node within one graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A labeled node. Labels are lowercase `[a-z0-9_]` tokens; multi-word
/// labels are joined with underscores so one node equals one copyable token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Node {
    pub id: NodeId,
    pub label: String,
}

/// A directed, unlabeled edge `head -> tail`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub head: NodeId,
    pub tail: NodeId,
}

/// Returns true for labels that satisfy the node-label charset invariant.
pub fn is_valid_label(label: &str) -> bool {
    !label.is_empty()
        && label
            .bytes()
            .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_')
}

/// A directed labeled graph over dense node ids. May be disconnected.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SceneGraph {
    nodes: Vec<Node>,
    edges: BTreeSet<Edge>,
}

impl SceneGraph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a graph from label and `(head, tail)` lists, validating every
    /// label and edge.
    pub fn from_parts<L, I>(labels: L, edges: I) -> Result<Self, GraphError>
    where
        L: IntoIterator,
        L::Item: AsRef<str>,
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut g = Self::new();
        for label in labels {
            g.add_node(label.as_ref())?;
        }
        for (h, t) in edges {
            g.add_edge(NodeId(h), NodeId(t))?;
        }
        Ok(g)
    }

    /// Appends a node, handing back the next dense id.
    pub fn add_node(&mut self, label: &str) -> Result<NodeId, GraphError> {
        if RESERVED_TOKENS.contains(&label) {
            return Err(GraphError::ReservedLabel(label.to_string()));
        }
        if !is_valid_label(label) {
            return Err(GraphError::InvalidLabel(label.to_string()));
        }
        Ok(self.push_node_unchecked(label))
    }

    /// Appends a node without label validation. Only the extended-graph
    /// machinery uses this, to materialize `DELETE` dummies.
    pub(crate) fn push_node_unchecked(&mut self, label: &str) -> NodeId {
        let id = NodeId(self.nodes.len());
        self.nodes.push(Node {
            id,
            label: label.to_string(),
        });
        id
    }

    /// Inserts a directed edge. Idempotent: inserting an existing edge is a
    /// no-op.
    pub fn add_edge(&mut self, head: NodeId, tail: NodeId) -> Result<(), GraphError> {
        if head == tail {
            return Err(GraphError::SelfLoop(head));
        }
        for id in [head, tail] {
            if id.0 >= self.nodes.len() {
                return Err(GraphError::UnknownNode(id, self.nodes.len()));
            }
        }
        self.edges.insert(Edge { head, tail });
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    /// Edges in sorted `(head, tail)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().copied()
    }

    pub fn contains_edge(&self, head: NodeId, tail: NodeId) -> bool {
        self.edges.contains(&Edge { head, tail })
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.nodes[id.0].label
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.nodes.iter().map(|n| n.label.as_str())
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len()).map(NodeId)
    }

    pub fn out_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.head == id)
            .map(|e| e.tail)
            .collect()
    }

    pub fn in_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        self.edges
            .iter()
            .filter(|e| e.tail == id)
            .map(|e| e.head)
            .collect()
    }

    /// Neighbors along either edge direction, deduplicated, ascending.
    pub fn undirected_neighbors(&self, id: NodeId) -> Vec<NodeId> {
        let mut out: Vec<NodeId> = self
            .edges
            .iter()
            .filter_map(|e| {
                if e.head == id {
                    Some(e.tail)
                } else if e.tail == id {
                    Some(e.head)
                } else {
                    None
                }
            })
            .collect();
        out.sort();
        out.dedup();
        out
    }

    pub fn in_degree(&self, id: NodeId) -> usize {
        self.edges.iter().filter(|e| e.tail == id).count()
    }

    /// Total degree: in plus out.
    pub fn degree(&self, id: NodeId) -> usize {
        self.edges
            .iter()
            .filter(|e| e.head == id || e.tail == id)
            .count()
    }

    /// Removes the given nodes and every incident edge, re-densifying the
    /// remaining ids while preserving their relative order.
    pub fn remove_nodes(&self, victims: &BTreeSet<NodeId>) -> SceneGraph {
        let mut remap = vec![None; self.nodes.len()];
        let mut out = SceneGraph::new();
        for node in &self.nodes {
            if !victims.contains(&node.id) {
                remap[node.id.0] = Some(out.push_node_unchecked(&node.label));
            }
        }
        for e in &self.edges {
            if let (Some(h), Some(t)) = (remap[e.head.0], remap[e.tail.0]) {
                out.edges.insert(Edge { head: h, tail: t });
            }
        }
        out
    }

    /// Rebuilds the graph with node ids permuted: node `i` of the result is
    /// node `perm[i]` of `self`. `perm` must be a permutation of `0..n`.
    pub fn permuted(&self, perm: &[usize]) -> SceneGraph {
        assert_eq!(perm.len(), self.nodes.len(), "permutation length mismatch");
        let mut inverse = vec![0; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let mut out = SceneGraph::new();
        for &old in perm {
            out.push_node_unchecked(&self.nodes[old].label);
        }
        for e in &self.edges {
            out.edges.insert(Edge {
                head: NodeId(inverse[e.head.0]),
                tail: NodeId(inverse[e.tail.0]),
            });
        }
        out
    }
}

/// A scene graph plus `DELETE` dummy nodes: the lossless intermediate
/// between a source graph and its modification target. Each dummy has
/// exactly one outgoing edge pointing at the non-dummy node it removes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtendedGraph {
    base: SceneGraph,
    dummies: BTreeSet<NodeId>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtendedGraphError {
    #[error("dummy {0} must have exactly one outgoing edge to a non-dummy victim")]
    MalformedDummy(NodeId),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

impl ExtendedGraph {
    /// Wraps a plain scene graph with no dummies.
    pub fn from_scene(base: SceneGraph) -> Self {
        Self {
            base,
            dummies: BTreeSet::new(),
        }
    }

    /// Appends a regular (non-dummy) node.
    pub fn add_node(&mut self, label: &str) -> Result<NodeId, GraphError> {
        self.base.add_node(label)
    }

    /// Appends a `DELETE` dummy aimed at `victim`.
    pub fn add_dummy(&mut self, victim: NodeId) -> Result<NodeId, ExtendedGraphError> {
        if victim.0 >= self.base.node_count() || self.dummies.contains(&victim) {
            return Err(ExtendedGraphError::MalformedDummy(victim));
        }
        let id = self.base.push_node_unchecked(DELETE_TOKEN);
        self.dummies.insert(id);
        self.base.add_edge(id, victim).map_err(GraphError::from)?;
        Ok(id)
    }

    pub fn add_edge(&mut self, head: NodeId, tail: NodeId) -> Result<(), GraphError> {
        self.base.add_edge(head, tail)
    }

    pub fn base(&self) -> &SceneGraph {
        &self.base
    }

    pub fn is_dummy(&self, id: NodeId) -> bool {
        self.dummies.contains(&id)
    }

    pub fn dummies(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.dummies.iter().copied()
    }

    pub fn dummy_count(&self) -> usize {
        self.dummies.len()
    }

    /// Checks the dummy invariants: exactly one incident edge per dummy,
    /// directed dummy -> victim, victim not itself a dummy.
    pub fn validate(&self) -> Result<(), ExtendedGraphError> {
        for &d in &self.dummies {
            let outs = self.base.out_neighbors(d);
            let ins = self.base.in_neighbors(d);
            let ok = outs.len() == 1 && ins.is_empty() && !self.dummies.contains(&outs[0]);
            if !ok {
                return Err(ExtendedGraphError::MalformedDummy(d));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_id_is_zero() {
        let mut g = SceneGraph::new();
        assert_eq!(g.add_node("boy").unwrap(), NodeId(0));
    }

    #[test]
    fn ids_are_dense_successors() {
        let mut g = SceneGraph::new();
        for label in ["boy", "holding", "racket"] {
            g.add_node(label).unwrap();
        }
        assert_eq!(g.add_node("racket2").unwrap(), NodeId(3));
    }

    #[test]
    fn reserved_labels_rejected() {
        let mut g = SceneGraph::new();
        for reserved in RESERVED_TOKENS {
            assert_eq!(
                g.add_node(reserved),
                Err(GraphError::ReservedLabel(reserved.to_string()))
            );
        }
    }

    #[test]
    fn invalid_labels_rejected() {
        let mut g = SceneGraph::new();
        for bad in ["", "two words", "Boy", "semi;colon", "a#b"] {
            assert_eq!(g.add_node(bad), Err(GraphError::InvalidLabel(bad.into())));
        }
        assert!(g.add_node("traffic_light").is_ok());
    }

    #[test]
    fn edge_insert_is_idempotent() {
        let mut g = SceneGraph::from_parts(["a", "b"], []).unwrap();
        g.add_edge(NodeId(0), NodeId(1)).unwrap();
        g.add_edge(NodeId(0), NodeId(1)).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.contains_edge(NodeId(0), NodeId(1)));
    }

    #[test]
    fn self_loop_rejected() {
        let mut g = SceneGraph::from_parts(["a", "b", "c"], []).unwrap();
        assert_eq!(
            g.add_edge(NodeId(2), NodeId(2)),
            Err(GraphError::SelfLoop(NodeId(2)))
        );
    }

    #[test]
    fn unknown_node_rejected() {
        let mut g = SceneGraph::from_parts(["a"], []).unwrap();
        assert_eq!(
            g.add_edge(NodeId(0), NodeId(5)),
            Err(GraphError::UnknownNode(NodeId(5), 1))
        );
    }

    #[test]
    fn remove_nodes_redensifies() {
        let g = SceneGraph::from_parts(["a", "b", "c"], [(0, 1), (1, 2)]).unwrap();
        let reduced = g.remove_nodes(&BTreeSet::from([NodeId(1)]));
        assert_eq!(reduced.node_count(), 2);
        assert_eq!(reduced.label(NodeId(0)), "a");
        assert_eq!(reduced.label(NodeId(1)), "c");
        assert_eq!(reduced.edge_count(), 0);
    }

    #[test]
    fn dummy_invariants_enforced() {
        let g = SceneGraph::from_parts(["racket", "blue"], [(0, 1)]).unwrap();
        let mut ext = ExtendedGraph::from_scene(g);
        let d = ext.add_dummy(NodeId(1)).unwrap();
        assert!(ext.is_dummy(d));
        assert_eq!(ext.base().label(d), DELETE_TOKEN);
        ext.validate().unwrap();
        // a dummy aimed at another dummy is rejected up front
        assert!(ext.add_dummy(d).is_err());
    }

    #[test]
    fn graphs_are_send_and_sync() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<SceneGraph>();
        assert_send_sync::<ExtendedGraph>();
    }
}
