//! Graphviz DOT export for visual inspection.

use crate::graph::{ExtendedGraph, SceneGraph};

/// Renders a scene graph as a DOT digraph.
pub fn scene_to_dot(g: &SceneGraph) -> String {
    render(g, |_| false)
}

/// Renders an extended graph; `DELETE` dummies come out dashed diamonds so
/// they stand apart from real nodes.
pub fn extended_to_dot(g: &ExtendedGraph) -> String {
    render(g.base(), |id| g.is_dummy(id))
}

fn render(g: &SceneGraph, is_dummy: impl Fn(crate::graph::NodeId) -> bool) -> String {
    let mut out = String::from("digraph g {\n");
    for node in g.nodes() {
        let attrs = if is_dummy(node.id) {
            format!("label=\"{}\", shape=diamond, style=dashed", node.label)
        } else {
            format!("label=\"{}\"", node.label)
        };
        out.push_str(&format!("  n{} [{}];\n", node.id.index(), attrs));
    }
    for e in g.edges() {
        out.push_str(&format!("  n{} -> n{};\n", e.head.index(), e.tail.index()));
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{ExtendedGraph, NodeId, SceneGraph};

    #[test]
    fn empty_graph_is_bare_digraph() {
        assert_eq!(scene_to_dot(&SceneGraph::new()), "digraph g {\n}\n");
    }

    #[test]
    fn single_node_statement() {
        let g = SceneGraph::from_parts(["boy"], []).unwrap();
        let dot = scene_to_dot(&g);
        assert!(dot.contains("n0 [label=\"boy\"];"));
    }

    #[test]
    fn dummies_visually_marked() {
        let g = SceneGraph::from_parts(["racket", "blue"], [(0, 1)]).unwrap();
        let mut ext = ExtendedGraph::from_scene(g);
        ext.add_dummy(NodeId(1)).unwrap();
        let dot = extended_to_dot(&ext);
        assert!(dot.contains("shape=diamond"));
        assert!(dot.contains("label=\"DELETE\""));
    }
}
