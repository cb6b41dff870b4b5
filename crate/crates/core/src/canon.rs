//! Canonical node ordering and exact-match serialization.
//!
//! Graph-level accuracy is exact string match, so every graph needs one
//! deterministic textual form that does not depend on node numbering or
//! insertion history. The order is a breadth-first traversal seeded from
//! the in-degree-0 roots sorted by `(label, id)`; each frontier's children
//! are visited in `(label, id)` order; whatever the root-seeded sweep
//! cannot reach (cycles) is picked up from the smallest unvisited
//! `(label, id)` node until all nodes are placed.

use crate::graph::{NodeId, SceneGraph};

impl SceneGraph {
    /// Deterministic total order over the node ids.
    pub fn canonical_order(&self) -> Vec<NodeId> {
        let n = self.node_count();
        let mut order = Vec::with_capacity(n);
        let mut visited = vec![false; n];

        let mut out_adj: Vec<Vec<NodeId>> = vec![Vec::new(); n];
        for e in self.edges() {
            out_adj[e.head.index()].push(e.tail);
        }

        let by_label = |&id: &NodeId| (self.label(id).to_string(), id);

        let mut seeds: Vec<NodeId> = self.node_ids().filter(|&id| self.in_degree(id) == 0).collect();
        seeds.sort_by_key(by_label);

        loop {
            let mut frontier: Vec<NodeId> = seeds
                .iter()
                .copied()
                .filter(|id| !visited[id.index()])
                .collect();
            for &id in &frontier {
                visited[id.index()] = true;
            }
            while !frontier.is_empty() {
                order.extend_from_slice(&frontier);
                let mut next: Vec<NodeId> = Vec::new();
                for &id in &frontier {
                    for &child in &out_adj[id.index()] {
                        if !visited[child.index()] {
                            visited[child.index()] = true;
                            next.push(child);
                        }
                    }
                }
                next.sort_by_key(by_label);
                frontier = next;
            }
            // Nodes unreachable from any root (cycles): restart from the
            // smallest unvisited (label, id).
            match self
                .node_ids()
                .filter(|id| !visited[id.index()])
                .min_by_key(by_label)
            {
                Some(seed) => seeds = vec![seed],
                None => break,
            }
        }
        debug_assert_eq!(order.len(), n);
        order
    }

    /// Per-node `label#k` tags, where `k` counts equal labels in canonical
    /// order. Indexed by `NodeId`.
    pub fn occurrence_tags(&self) -> Vec<String> {
        let mut tags = vec![String::new(); self.node_count()];
        let mut seen: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
        for id in self.canonical_order() {
            let label = self.label(id);
            let k = seen.entry(label).or_insert(0);
            tags[id.index()] = format!("{label}#{k}");
            *k += 1;
        }
        tags
    }

    /// Canonical string form: occurrence-tagged nodes in canonical order,
    /// then sorted `head->tail` tag pairs. Two graphs are treated as equal
    /// exactly when these strings are byte-equal. The empty graph
    /// serializes to the empty string.
    pub fn canonical_serialize(&self) -> String {
        if self.is_empty() {
            return String::new();
        }
        let tags = self.occurrence_tags();
        let nodes: Vec<&str> = self
            .canonical_order()
            .into_iter()
            .map(|id| tags[id.index()].as_str())
            .collect();
        let mut edges: Vec<String> = self
            .edges()
            .map(|e| format!("{}->{}", tags[e.head.index()], tags[e.tail.index()]))
            .collect();
        edges.sort();
        format!("{};{}", nodes.join(","), edges.join(","))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SceneGraph;

    fn fig1_left() -> SceneGraph {
        // boy -> holding -> racket, girl -> standing
        SceneGraph::from_parts(
            ["boy", "holding", "racket", "girl", "standing"],
            [(0, 1), (1, 2), (3, 4)],
        )
        .unwrap()
    }

    #[test]
    fn bfs_order_interleaves_components_by_frontier() {
        let g = fig1_left();
        let labels: Vec<&str> = g.canonical_order().into_iter().map(|id| g.label(id)).collect();
        assert_eq!(labels, ["boy", "girl", "holding", "standing", "racket"]);
    }

    #[test]
    fn single_node_orders_alone() {
        let g = SceneGraph::from_parts(["tree"], []).unwrap();
        assert_eq!(g.canonical_order(), vec![NodeId(0)]);
    }

    #[test]
    fn order_is_a_permutation_even_with_cycles() {
        // a <-> b cycle plus an edge into a sink; no in-degree-0 roots.
        let g = SceneGraph::from_parts(["b", "a", "sink"], [(0, 1), (1, 0), (0, 2)]).unwrap();
        let order = g.canonical_order();
        let mut sorted = order.clone();
        sorted.sort();
        assert_eq!(sorted, vec![NodeId(0), NodeId(1), NodeId(2)]);
        // restart picks "a" (smallest label) first
        assert_eq!(g.label(order[0]), "a");
    }

    #[test]
    fn relabeling_maps_orders_onto_each_other() {
        let g = fig1_left();
        let perm = vec![4, 2, 0, 3, 1];
        let h = g.permuted(&perm);
        let g_labels: Vec<&str> = g.canonical_order().iter().map(|&i| g.label(i)).collect();
        let h_labels: Vec<&str> = h.canonical_order().iter().map(|&i| h.label(i)).collect();
        assert_eq!(g_labels, h_labels);
    }

    #[test]
    fn empty_graph_serializes_empty() {
        assert_eq!(SceneGraph::new().canonical_serialize(), "");
    }

    #[test]
    fn serialization_ignores_node_numbering() {
        let g = fig1_left();
        let h = g.permuted(&[3, 0, 4, 1, 2]);
        assert_eq!(g.canonical_serialize(), h.canonical_serialize());
    }

    #[test]
    fn label_differences_surface() {
        let a = SceneGraph::from_parts(["boy", "holding", "racket"], [(0, 1), (1, 2)]).unwrap();
        let b = SceneGraph::from_parts(["girl", "holding", "racket"], [(0, 1), (1, 2)]).unwrap();
        assert_ne!(a.canonical_serialize(), b.canonical_serialize());
    }

    #[test]
    fn duplicate_labels_get_occurrence_indices() {
        let g = SceneGraph::from_parts(["mountain", "gray", "gray"], [(0, 1), (0, 2)]).unwrap();
        let s = g.canonical_serialize();
        assert_eq!(s, "mountain#0,gray#0,gray#1;mountain#0->gray#0,mountain#0->gray#1");
    }
}
