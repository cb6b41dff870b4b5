//! Lossless conversion between `(source, target)` graph pairs and
//! deterministic expansion-action sequences.
//!
//! The oracle turns a modification example into the step-by-step recipe a
//! decoder is trained to imitate: first one `DELETE` dummy per removed
//! node, then the inserted nodes with their attachment edges, then `EOS`.
//! Applying the recipe to the source yields the extended graph, and
//! reducing the extended graph reproduces the target exactly.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::graph::{
    ExtendedGraph, ExtendedGraphError, GraphError, NodeId, SceneGraph, DELETE_TOKEN, EOS_TOKEN,
};

/// Direction of an attachment edge relative to the newly added node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Direction {
    /// new -> existing
    Out,
    /// existing -> new
    In,
}

/// One attachment edge of a new node: which already-materialized position
/// it connects to, and which way the edge points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Attachment {
    pub target: usize,
    pub direction: Direction,
}

/// One expansion step. Insert adds a labeled node with its attachment
/// edges; Delete adds a dummy aimed at the victim position; Eos terminates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExpansionAction {
    Insert {
        label: String,
        attachments: Vec<Attachment>,
    },
    Delete {
        victim: usize,
    },
    Eos,
}

impl ExpansionAction {
    /// The label the node decoder must produce for this step.
    pub fn label(&self) -> &str {
        match self {
            ExpansionAction::Insert { label, .. } => label,
            ExpansionAction::Delete { .. } => DELETE_TOKEN,
            ExpansionAction::Eos => EOS_TOKEN,
        }
    }

    /// Attachment edges as the edge decoder sees them. Delete is a single
    /// outgoing edge dummy -> victim; Eos has none.
    pub fn attachments(&self) -> Vec<Attachment> {
        match self {
            ExpansionAction::Insert { attachments, .. } => attachments.clone(),
            ExpansionAction::Delete { victim } => vec![Attachment {
                target: *victim,
                direction: Direction::Out,
            }],
            ExpansionAction::Eos => Vec::new(),
        }
    }

    pub fn is_eos(&self) -> bool {
        matches!(self, ExpansionAction::Eos)
    }
}

/// An ordered action list: all deletes, then all inserts, then one `EOS`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionSequence {
    actions: Vec<ExpansionAction>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OracleError {
    #[error("attachment references position {position}, but only {len} nodes exist at that step")]
    IndexOutOfRange { position: usize, len: usize },
    #[error("malformed action sequence: {0}")]
    InvalidSequence(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Extended(#[from] ExtendedGraphError),
}

impl ActionSequence {
    pub fn new(actions: Vec<ExpansionAction>) -> Result<Self, OracleError> {
        let seq = Self { actions };
        seq.validate()?;
        Ok(seq)
    }

    fn validate(&self) -> Result<(), OracleError> {
        let err = |msg: &str| Err(OracleError::InvalidSequence(msg.to_string()));
        match self.actions.last() {
            Some(ExpansionAction::Eos) => {}
            _ => return err("sequence must end with exactly one EOS"),
        }
        if self.actions[..self.actions.len() - 1].iter().any(|a| a.is_eos()) {
            return err("EOS may only appear in final position");
        }
        let mut seen_insert = false;
        for a in &self.actions {
            match a {
                ExpansionAction::Insert { .. } => seen_insert = true,
                ExpansionAction::Delete { .. } if seen_insert => {
                    return err("every DELETE must come before the first INSERT");
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn actions(&self) -> &[ExpansionAction] {
        &self.actions
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }
}

/// How source nodes correspond to target nodes: matched pairs, removals,
/// and insertions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    /// source id -> target id for nodes present on both sides
    pub kept: BTreeMap<NodeId, NodeId>,
    pub deleted: BTreeSet<NodeId>,
    pub inserted: BTreeSet<NodeId>,
}

/// Matches source and target nodes by exact label. Within a label, pairs
/// are made in descending total-degree order, then canonical position;
/// leftovers on the source side are deletions, on the target side
/// insertions. Labels in these datasets are near-unique, so the tie-break
/// only matters for duplicates.
pub fn align_nodes(source: &SceneGraph, target: &SceneGraph) -> Alignment {
    let rank = |g: &SceneGraph| -> Vec<usize> {
        let mut pos = vec![0; g.node_count()];
        for (i, id) in g.canonical_order().into_iter().enumerate() {
            pos[id.index()] = i;
        }
        pos
    };
    let src_pos = rank(source);
    let tgt_pos = rank(target);

    let group = |g: &SceneGraph, pos: &[usize]| -> BTreeMap<String, Vec<NodeId>> {
        let mut groups: BTreeMap<String, Vec<NodeId>> = BTreeMap::new();
        for node in g.nodes() {
            groups.entry(node.label.clone()).or_default().push(node.id);
        }
        for ids in groups.values_mut() {
            ids.sort_by_key(|id| (std::cmp::Reverse(g.degree(*id)), pos[id.index()]));
        }
        groups
    };

    let mut src_groups = group(source, &src_pos);
    let tgt_groups = group(target, &tgt_pos);

    let mut alignment = Alignment {
        kept: BTreeMap::new(),
        deleted: BTreeSet::new(),
        inserted: BTreeSet::new(),
    };
    for (label, tgt_ids) in &tgt_groups {
        let src_ids = src_groups.remove(label).unwrap_or_default();
        let matched = src_ids.len().min(tgt_ids.len());
        for i in 0..matched {
            alignment.kept.insert(src_ids[i], tgt_ids[i]);
        }
        alignment.deleted.extend(&src_ids[matched..]);
        alignment.inserted.extend(&tgt_ids[matched..]);
    }
    for (_, src_ids) in src_groups {
        alignment.deleted.extend(src_ids);
    }
    alignment
}

/// Derives the deterministic action sequence that rewrites `source` into
/// `target`: deletions in canonical-victim order, then insertions in BFS
/// order over the inserted subgraph seeded next to kept nodes, then `EOS`.
pub fn derive_actions(source: &SceneGraph, target: &SceneGraph) -> ActionSequence {
    let alignment = align_nodes(source, target);
    let mut src_pos = vec![0; source.node_count()];
    for (i, id) in source.canonical_order().into_iter().enumerate() {
        src_pos[id.index()] = i;
    }

    let mut actions = Vec::new();

    let mut victims: Vec<NodeId> = alignment.deleted.iter().copied().collect();
    victims.sort_by_key(|v| src_pos[v.index()]);
    for v in &victims {
        actions.push(ExpansionAction::Delete {
            victim: src_pos[v.index()],
        });
    }

    // Expansion-time position of every target node that is already
    // materialized: kept nodes sit at their source canonical position.
    let mut materialized: BTreeMap<NodeId, usize> = alignment
        .kept
        .iter()
        .map(|(s, t)| (*t, src_pos[s.index()]))
        .collect();
    let mut next_position = source.node_count() + victims.len();

    let insert_order = inserted_bfs_order(target, &alignment);
    for t_id in insert_order {
        let mut attachments = Vec::new();
        for e in target.edges() {
            if e.head == t_id {
                if let Some(&pos) = materialized.get(&e.tail) {
                    attachments.push(Attachment {
                        target: pos,
                        direction: Direction::Out,
                    });
                }
            } else if e.tail == t_id {
                if let Some(&pos) = materialized.get(&e.head) {
                    attachments.push(Attachment {
                        target: pos,
                        direction: Direction::In,
                    });
                }
            }
        }
        attachments.sort();
        actions.push(ExpansionAction::Insert {
            label: target.label(t_id).to_string(),
            attachments,
        });
        materialized.insert(t_id, next_position);
        next_position += 1;
    }

    actions.push(ExpansionAction::Eos);
    ActionSequence::new(actions).expect("derived sequences are well-formed by construction")
}

/// BFS over the inserted subgraph of the target: seeds are inserted nodes
/// adjacent to kept nodes, frontiers expand through inserted-inserted
/// adjacency, ties break on `(label, id)`, and inserted nodes untouched by
/// the sweep are appended last in `(label, id)` order.
fn inserted_bfs_order(target: &SceneGraph, alignment: &Alignment) -> Vec<NodeId> {
    let inserted = &alignment.inserted;
    let kept: BTreeSet<NodeId> = alignment.kept.values().copied().collect();
    let key = |&id: &NodeId| (target.label(id).to_string(), id);

    let mut seeds: Vec<NodeId> = inserted
        .iter()
        .copied()
        .filter(|id| {
            target
                .undirected_neighbors(*id)
                .iter()
                .any(|n| kept.contains(n))
        })
        .collect();
    seeds.sort_by_key(key);

    let mut order = Vec::new();
    let mut visited: BTreeSet<NodeId> = seeds.iter().copied().collect();
    let mut frontier = seeds;
    while !frontier.is_empty() {
        order.extend_from_slice(&frontier);
        let mut next = Vec::new();
        for &id in &frontier {
            for n in target.undirected_neighbors(id) {
                if inserted.contains(&n) && visited.insert(n) {
                    next.push(n);
                }
            }
        }
        next.sort_by_key(key);
        frontier = next;
    }

    let mut leftovers: Vec<NodeId> = inserted
        .iter()
        .copied()
        .filter(|id| !visited.contains(id))
        .collect();
    leftovers.sort_by_key(key);
    order.extend(leftovers);
    order
}

/// Replays an action sequence on a source graph, producing the extended
/// graph. Node positions are the canonical source order followed by the
/// action nodes in order.
pub fn apply_actions(
    source: &SceneGraph,
    actions: &ActionSequence,
) -> Result<ExtendedGraph, OracleError> {
    actions.validate()?;
    let order = source.canonical_order();
    let mut scene = SceneGraph::new();
    for &id in &order {
        scene.add_node(source.label(id))?;
    }
    let mut pos_of = vec![0; source.node_count()];
    for (i, id) in order.iter().enumerate() {
        pos_of[id.index()] = i;
    }
    for e in source.edges() {
        scene.add_edge(NodeId(pos_of[e.head.index()]), NodeId(pos_of[e.tail.index()]))?;
    }

    let mut ext = ExtendedGraph::from_scene(scene);
    for action in actions.actions() {
        let len = ext.base().node_count();
        let check = |position: usize| {
            if position >= len {
                Err(OracleError::IndexOutOfRange { position, len })
            } else {
                Ok(NodeId(position))
            }
        };
        match action {
            ExpansionAction::Eos => break,
            ExpansionAction::Delete { victim } => {
                let victim = check(*victim)?;
                ext.add_dummy(victim)?;
            }
            ExpansionAction::Insert { label, attachments } => {
                let targets: Vec<(NodeId, Direction)> = attachments
                    .iter()
                    .map(|a| check(a.target).map(|id| (id, a.direction)))
                    .collect::<Result<_, _>>()?;
                let new_id = ext.add_node(label)?;
                for (node, direction) in targets {
                    match direction {
                        Direction::Out => ext.add_edge(new_id, node)?,
                        Direction::In => ext.add_edge(node, new_id)?,
                    }
                }
            }
        }
    }
    Ok(ext)
}

/// Removes every `DELETE` dummy together with its victim and all edges
/// incident to either, re-densifying ids in place.
pub fn reduce_extended(extended: &ExtendedGraph) -> SceneGraph {
    let mut doomed: BTreeSet<NodeId> = extended.dummies().collect();
    for dummy in extended.dummies() {
        doomed.extend(extended.base().out_neighbors(dummy));
    }
    extended.base().remove_nodes(&doomed)
}

/// True when derive -> apply -> reduce reproduces the target exactly
/// (canonical string equality).
pub fn roundtrip_check(source: &SceneGraph, target: &SceneGraph) -> bool {
    let actions = derive_actions(source, target);
    match apply_actions(source, &actions) {
        Ok(ext) => reduce_extended(&ext).canonical_serialize() == target.canonical_serialize(),
        Err(_) => false,
    }
}
