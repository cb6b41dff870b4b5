//! Synthetic `(source, query, target)` triple generator.
//!
//! Base scene graphs are sampled structurally: `k` objects chained through
//! relation nodes (`obj -> rel -> obj`), each object dressed with a few
//! attribute nodes (`obj -> attr`). One of three operations then produces
//! the modification pair:
//!
//! * DELETE — remove a sampled node (plus any relation node this orphans)
//!   from the base graph; the base is the source.
//! * INSERT — the reverse: the base graph is the target and the source is
//!   the base with one attribute or relation node removed.
//! * SUBSTITUTE — swap a node label for another member of its substitution
//!   group, edges untouched.
//!
//! Queries come from templates with `**`/`@@` slots. Every triple is
//! checked against the oracle round trip before it is emitted. Generation
//! is deterministic: each example draws from its own counter-derived RNG
//! stream, so outputs are byte-identical for a fixed `(seed, config)`.

pub mod vocab;

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::graph::{NodeId, SceneGraph};
use crate::oracle::roundtrip_check;
use crate::rng::Rng;
use crate::triple::{write_triples, Triple, TripleIoError};
pub use vocab::{VocabConfig, VocabError};

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("invalid generator config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Vocab(#[from] VocabError),
    #[error(transparent)]
    Io(#[from] TripleIoError),
    #[error("generated triple failed the oracle round trip (split {split}, example {index})")]
    RoundTrip { split: String, index: usize },
}

/// Named size presets mirroring the four benchmark corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    User,
    Mscoco,
    Gcc,
    Rsicd,
}

impl Profile {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "user" => Some(Self::User),
            "mscoco" => Some(Self::Mscoco),
            "gcc" => Some(Self::Gcc),
            "rsicd" => Some(Self::Rsicd),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::User => "user",
            Self::Mscoco => "mscoco",
            Self::Gcc => "gcc",
            Self::Rsicd => "rsicd",
        }
    }

    /// Size parameters tuned so mean node counts land on the corpus
    /// statistics (2.0 / 2.9 / 3.8 / 5.9 source nodes).
    pub fn size_profile(self) -> SizeProfile {
        match self {
            Self::User => SizeProfile {
                min_objects: 1,
                max_objects: 1,
                object_weights: vec![1.0],
                attr_weights: [0.0, 1.0, 0.0],
                oov_fraction: 0.10,
            },
            Self::Mscoco => SizeProfile {
                min_objects: 2,
                max_objects: 2,
                object_weights: vec![1.0],
                attr_weights: [0.9, 0.1, 0.0],
                oov_fraction: 0.04,
            },
            Self::Gcc => SizeProfile {
                min_objects: 2,
                max_objects: 3,
                object_weights: vec![0.85, 0.15],
                attr_weights: [0.6, 0.4, 0.0],
                oov_fraction: 0.03,
            },
            Self::Rsicd => SizeProfile {
                min_objects: 2,
                max_objects: 4,
                object_weights: vec![0.25, 0.55, 0.20],
                attr_weights: [0.65, 0.35, 0.0],
                oov_fraction: 0.12,
            },
        }
    }
}

/// Base-graph size distribution: object count range with per-count
/// weights, attribute-count weights per object, and the fraction of each
/// label list held out of the training split to create OOV labels.
#[derive(Debug, Clone, PartialEq)]
pub struct SizeProfile {
    pub min_objects: usize,
    pub max_objects: usize,
    pub object_weights: Vec<f64>,
    pub attr_weights: [f64; 3],
    pub oov_fraction: f64,
}

/// Full generator configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct GenConfig {
    pub train: usize,
    pub dev: usize,
    pub test: usize,
    pub seed: u64,
    /// Probabilities of INSERT, DELETE, SUBSTITUTE. Must sum to 1.
    pub op_mix: [f64; 3],
    pub size: SizeProfile,
}

impl GenConfig {
    pub fn new(profile: Profile, seed: u64, train: usize, dev: usize, test: usize) -> Self {
        Self {
            train,
            dev,
            test,
            seed,
            op_mix: [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
            size: profile.size_profile(),
        }
    }

    fn validate(&self) -> Result<(), DatagenError> {
        let bad = |msg: &str| Err(DatagenError::InvalidConfig(msg.to_string()));
        if self.train == 0 || self.dev == 0 || self.test == 0 {
            return bad("split counts must be positive");
        }
        if (self.op_mix.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad("op_mix must sum to 1");
        }
        if self.op_mix.iter().any(|&p| p < 0.0) {
            return bad("op_mix probabilities must be non-negative");
        }
        let size = &self.size;
        if size.min_objects == 0 || size.min_objects > size.max_objects {
            return bad("object count range is empty");
        }
        if size.object_weights.len() != size.max_objects - size.min_objects + 1 {
            return bad("object_weights must cover the object count range");
        }
        if !(0.0..1.0).contains(&size.oov_fraction) {
            return bad("oov_fraction must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NodeKind {
    Object,
    Attribute,
    Relation,
}

/// A sampled base graph with the role of every node remembered, so the
/// modification operations can reason about structure.
#[derive(Debug, Clone)]
pub struct BaseGraph {
    graph: SceneGraph,
    kinds: Vec<NodeKind>,
}

impl BaseGraph {
    pub fn graph(&self) -> &SceneGraph {
        &self.graph
    }

    fn nodes_of_kind(&self, kind: NodeKind) -> Vec<NodeId> {
        self.kinds
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == kind)
            .map(|(i, _)| NodeId(i))
            .collect()
    }

    /// The node set deletion of `victim` takes with it: the victim plus
    /// any relation node that would lose an endpoint.
    fn deletion_set(&self, victim: NodeId) -> BTreeSet<NodeId> {
        let mut doomed = BTreeSet::from([victim]);
        if self.kinds[victim.index()] == NodeKind::Object {
            for n in self.graph.undirected_neighbors(victim) {
                if self.kinds[n.index()] == NodeKind::Relation {
                    doomed.insert(n);
                }
            }
        }
        doomed
    }
}

/// Label pools a split is allowed to sample from. The training split gets
/// the vocabulary minus the held-out labels; dev/test use everything.
#[derive(Debug, Clone)]
pub struct LabelPools {
    pub objects: Vec<String>,
    pub attributes: Vec<String>,
    pub relations: Vec<String>,
}

impl LabelPools {
    fn full(vocab: &VocabConfig) -> Self {
        Self {
            objects: vocab.objects.clone(),
            attributes: vocab.attributes.clone(),
            relations: vocab.relations.clone(),
        }
    }

    /// Removes a deterministic held-out subset of each list.
    fn with_holdout(vocab: &VocabConfig, fraction: f64, rng: &mut Rng) -> (Self, BTreeSet<String>) {
        let mut held_out = BTreeSet::new();
        let mut reduce = |labels: &[String]| -> Vec<String> {
            let k = ((labels.len() as f64) * fraction).ceil() as usize;
            let k = k.min(labels.len().saturating_sub(2));
            let drop: BTreeSet<usize> = rng.sample_indices(labels.len(), k).into_iter().collect();
            let mut kept = Vec::new();
            for (i, l) in labels.iter().enumerate() {
                if drop.contains(&i) {
                    held_out.insert(l.clone());
                } else {
                    kept.push(l.clone());
                }
            }
            kept
        };
        let pools = Self {
            objects: reduce(&vocab.objects),
            attributes: reduce(&vocab.attributes),
            relations: reduce(&vocab.relations),
        };
        (pools, held_out)
    }

    fn allows(&self, label: &str) -> bool {
        self.objects.iter().any(|l| l == label)
            || self.attributes.iter().any(|l| l == label)
            || self.relations.iter().any(|l| l == label)
    }
}

/// Samples one connected base graph: objects chained through relations,
/// attributes hanging off objects, all labels distinct within the graph.
pub fn sample_base_graph(rng: &mut Rng, pools: &LabelPools, size: &SizeProfile) -> BaseGraph {
    let k = size.min_objects + rng.choose_weighted(&size.object_weights);
    let k = k.min(pools.objects.len());
    let object_labels: Vec<&String> = rng
        .sample_indices(pools.objects.len(), k)
        .into_iter()
        .map(|i| &pools.objects[i])
        .collect();

    let mut graph = SceneGraph::new();
    let mut kinds = Vec::new();
    let mut object_ids = Vec::new();
    for label in &object_labels {
        object_ids.push(graph.add_node(label).expect("vocab labels are valid"));
        kinds.push(NodeKind::Object);
    }

    // chain the objects through distinct relation nodes
    let rel_count = k.saturating_sub(1).min(pools.relations.len());
    let rel_labels: Vec<&String> = rng
        .sample_indices(pools.relations.len(), rel_count)
        .into_iter()
        .map(|i| &pools.relations[i])
        .collect();
    for (i, label) in rel_labels.iter().enumerate() {
        let rel = graph.add_node(label).expect("vocab labels are valid");
        kinds.push(NodeKind::Relation);
        graph.add_edge(object_ids[i], rel).unwrap();
        graph.add_edge(rel, object_ids[i + 1]).unwrap();
    }

    // attributes, distinct across the whole graph
    let mut attr_pool: Vec<usize> = rng.sample_indices(pools.attributes.len(), pools.attributes.len());
    for (i, &obj) in object_ids.iter().enumerate() {
        let mut want = rng.choose_weighted(&size.attr_weights);
        // a single bare object would make a one-node graph; force an attribute
        if k == 1 && i == 0 && want == 0 {
            want = 1;
        }
        for _ in 0..want {
            let Some(idx) = attr_pool.pop() else { break };
            let attr = graph
                .add_node(&pools.attributes[idx])
                .expect("vocab labels are valid");
            kinds.push(NodeKind::Attribute);
            graph.add_edge(obj, attr).unwrap();
        }
    }

    BaseGraph { graph, kinds }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OpKind {
    Insert,
    Delete,
    Substitute,
}

fn fill_template(template: &str, old: &str, new: Option<&str>) -> Vec<String> {
    let mut s = template.replace("**", old);
    if let Some(new) = new {
        s = s.replace("@@", new);
    }
    s.split_whitespace().map(str::to_string).collect()
}

/// Applies DELETE: picks a victim uniformly, removes it together with any
/// relation node this orphans, and renders a delete-template query.
pub fn apply_delete(base: &BaseGraph, rng: &mut Rng, vocab: &VocabConfig) -> (SceneGraph, Vec<String>) {
    let victim = NodeId(rng.below(base.graph.node_count()));
    let doomed = base.deletion_set(victim);
    let target = base.graph.remove_nodes(&doomed);
    let template = rng.choose(&vocab.delete_templates);
    let query = fill_template(template, base.graph.label(victim), None);
    (target, query)
}

/// Applies INSERT as reverse DELETE: the base graph is the target, and the
/// source drops one attribute or relation node. The query names the new
/// node along with its neighborhood ("red bridge", "bridge on river"), so
/// the attachment is recoverable from the text.
pub fn apply_insert(
    base: &BaseGraph,
    rng: &mut Rng,
    vocab: &VocabConfig,
) -> Option<(SceneGraph, Vec<String>)> {
    let mut candidates = base.nodes_of_kind(NodeKind::Attribute);
    candidates.extend(base.nodes_of_kind(NodeKind::Relation));
    if candidates.is_empty() {
        return None;
    }
    let victim = *rng.choose(&candidates);
    let source = base.graph.remove_nodes(&BTreeSet::from([victim]));

    let g = &base.graph;
    let phrase = match base.kinds[victim.index()] {
        NodeKind::Attribute => {
            let host = g.in_neighbors(victim)[0];
            format!("{} {}", g.label(victim), g.label(host))
        }
        NodeKind::Relation => {
            let head = g.in_neighbors(victim)[0];
            let tail = g.out_neighbors(victim)[0];
            format!("{} {} {}", g.label(head), g.label(victim), g.label(tail))
        }
        NodeKind::Object => unreachable!("objects are not insert victims"),
    };
    let template = rng.choose(&vocab.insert_templates);
    Some((source, fill_template(template, &phrase, None)))
}

/// Applies SUBSTITUTE: swaps one node's label for another member of its
/// substitution group that is absent from the graph (keeping labels unique
/// within a graph) and allowed in the split's pools.
pub fn apply_substitute(
    base: &BaseGraph,
    rng: &mut Rng,
    vocab: &VocabConfig,
    pools: &LabelPools,
) -> Option<(SceneGraph, Vec<String>)> {
    let present: BTreeSet<&str> = base.graph.labels().collect();
    let mut options: Vec<(NodeId, Vec<&String>)> = Vec::new();
    for node in base.graph.nodes() {
        if let Some(group) = vocab.group_of(&node.label) {
            let alternatives: Vec<&String> = group
                .iter()
                .filter(|m| !present.contains(m.as_str()) && pools.allows(m))
                .collect();
            if !alternatives.is_empty() {
                options.push((node.id, alternatives));
            }
        }
    }
    if options.is_empty() {
        return None;
    }
    let (victim, alternatives) = rng.choose(&options);
    let replacement = (*rng.choose(alternatives)).clone();
    let old = base.graph.label(*victim).to_string();

    let mut target = SceneGraph::new();
    for node in base.graph.nodes() {
        let label = if node.id == *victim { &replacement } else { &node.label };
        target.add_node(label).expect("vocab labels are valid");
    }
    for e in base.graph.edges() {
        target.add_edge(e.head, e.tail).unwrap();
    }

    let template = rng.choose(&vocab.substitute_templates);
    Some((target, fill_template(template, &old, Some(&replacement))))
}

/// Generates one triple from its own RNG stream.
fn generate_one(rng: &mut Rng, vocab: &VocabConfig, pools: &LabelPools, cfg: &GenConfig) -> Triple {
    let op = match rng.choose_weighted(&cfg.op_mix) {
        0 => OpKind::Insert,
        1 => OpKind::Delete,
        _ => OpKind::Substitute,
    };
    match op {
        OpKind::Insert => loop {
            let base = sample_base_graph(rng, pools, &cfg.size);
            if let Some((source, query)) = apply_insert(&base, rng, vocab) {
                return Triple {
                    source,
                    query,
                    target: base.graph,
                };
            }
        },
        OpKind::Delete => {
            let base = sample_base_graph(rng, pools, &cfg.size);
            let (target, query) = apply_delete(&base, rng, vocab);
            Triple {
                source: base.graph,
                query,
                target,
            }
        }
        OpKind::Substitute => {
            let base = sample_base_graph(rng, pools, &cfg.size);
            match apply_substitute(&base, rng, vocab, pools) {
                Some((target, query)) => Triple {
                    source: base.graph,
                    query,
                    target,
                },
                // no substitutable node: fall back to DELETE
                None => {
                    let (target, query) = apply_delete(&base, rng, vocab);
                    Triple {
                        source: base.graph,
                        query,
                        target,
                    }
                }
            }
        }
    }
}

/// Per-split summary statistics in the usual corpus-table layout.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitStats {
    pub name: &'static str,
    pub triples: usize,
    pub avg_source_nodes: f64,
    pub avg_target_nodes: f64,
    pub avg_source_edges: f64,
    pub avg_target_edges: f64,
    /// Percent of node occurrences whose label never appears in training
    /// graphs. None for the training split itself.
    pub oov_nodes_pct: Option<f64>,
    pub oov_edges_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetStats {
    pub splits: Vec<SplitStats>,
    pub held_out_labels: usize,
}

impl DatasetStats {
    /// Human-readable table, one statistic per row.
    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<22}", "Statistics");
        for s in &self.splits {
            let _ = write!(out, "{:>10}", s.name);
        }
        out.push('\n');
        let row = |out: &mut String, label: &str, f: &dyn Fn(&SplitStats) -> String| {
            let _ = write!(out, "{label:<22}");
            for s in &self.splits {
                let _ = write!(out, "{:>10}", f(s));
            }
            out.push('\n');
        };
        row(&mut out, "Triples", &|s| s.triples.to_string());
        row(&mut out, "Avg. Source Nodes", &|s| format!("{:.2}", s.avg_source_nodes));
        row(&mut out, "Avg. Target Nodes", &|s| format!("{:.2}", s.avg_target_nodes));
        row(&mut out, "Avg. Source Edges", &|s| format!("{:.2}", s.avg_source_edges));
        row(&mut out, "Avg. Target Edges", &|s| format!("{:.2}", s.avg_target_edges));
        let pct = |v: Option<f64>| match v {
            Some(p) => format!("{p:.1}"),
            None => "-".to_string(),
        };
        row(&mut out, "OOV Nodes (%)", &|s| pct(s.oov_nodes_pct));
        row(&mut out, "OOV Edges (%)", &|s| pct(s.oov_edges_pct));
        out
    }

    /// Machine-readable `stat <name> <split> <value>` lines.
    pub fn machine_lines(&self) -> String {
        let mut out = String::new();
        for s in &self.splits {
            let mut line = |name: &str, value: String| {
                let _ = writeln!(out, "stat {name} {} {value}", s.name);
            };
            line("triples", s.triples.to_string());
            line("avg_source_nodes", format!("{:.4}", s.avg_source_nodes));
            line("avg_target_nodes", format!("{:.4}", s.avg_target_nodes));
            line("avg_source_edges", format!("{:.4}", s.avg_source_edges));
            line("avg_target_edges", format!("{:.4}", s.avg_target_edges));
            if let Some(p) = s.oov_nodes_pct {
                line("oov_nodes_pct", format!("{p:.4}"));
            }
            if let Some(p) = s.oov_edges_pct {
                line("oov_edges_pct", format!("{p:.4}"));
            }
        }
        out
    }
}

/// Generates the three splits in memory. Split streams and example streams
/// are counter-derived, so any example can be regenerated independently.
pub fn generate_splits(
    cfg: &GenConfig,
    vocab: &VocabConfig,
) -> Result<(Vec<Triple>, Vec<Triple>, Vec<Triple>, DatasetStats), DatagenError> {
    cfg.validate()?;

    let mut holdout_rng = Rng::derive(cfg.seed, &[3]);
    let (train_pools, held_out) =
        LabelPools::with_holdout(vocab, cfg.size.oov_fraction, &mut holdout_rng);
    let full_pools = LabelPools::full(vocab);

    let mut splits = Vec::new();
    for (split_idx, (name, count, pools)) in [
        ("train", cfg.train, &train_pools),
        ("dev", cfg.dev, &full_pools),
        ("test", cfg.test, &full_pools),
    ]
    .into_iter()
    .enumerate()
    {
        let mut triples = Vec::with_capacity(count);
        for i in 0..count {
            let mut rng = Rng::derive(cfg.seed, &[split_idx as u64, i as u64]);
            let triple = generate_one(&mut rng, vocab, pools, cfg);
            if !roundtrip_check(&triple.source, &triple.target) {
                return Err(DatagenError::RoundTrip {
                    split: name.to_string(),
                    index: i,
                });
            }
            debug_assert!(
                triple.query.iter().all(|t| t != "**" && t != "@@"),
                "unfilled placeholder in query"
            );
            triples.push(triple);
        }
        splits.push((name, triples));
    }

    let stats = compute_stats(&splits, held_out.len());
    let mut it = splits.into_iter();
    let train = it.next().unwrap().1;
    let dev = it.next().unwrap().1;
    let test = it.next().unwrap().1;
    Ok((train, dev, test, stats))
}

fn compute_stats(splits: &[(&'static str, Vec<Triple>)], held_out: usize) -> DatasetStats {
    let train_triples = &splits[0].1;
    let mut train_labels: BTreeSet<&str> = BTreeSet::new();
    let mut train_edges: BTreeSet<(String, String)> = BTreeSet::new();
    for t in train_triples {
        for g in [&t.source, &t.target] {
            train_labels.extend(g.labels());
            for e in g.edges() {
                train_edges.insert((
                    g.label(e.head).to_string(),
                    g.label(e.tail).to_string(),
                ));
            }
        }
    }

    let mut out = Vec::new();
    for (idx, (name, triples)) in splits.iter().enumerate() {
        let n = triples.len().max(1) as f64;
        let mut s = SplitStats {
            name,
            triples: triples.len(),
            avg_source_nodes: 0.0,
            avg_target_nodes: 0.0,
            avg_source_edges: 0.0,
            avg_target_edges: 0.0,
            oov_nodes_pct: None,
            oov_edges_pct: None,
        };
        let mut node_occ = 0usize;
        let mut node_oov = 0usize;
        let mut edge_occ = 0usize;
        let mut edge_oov = 0usize;
        for t in triples.iter() {
            s.avg_source_nodes += t.source.node_count() as f64 / n;
            s.avg_target_nodes += t.target.node_count() as f64 / n;
            s.avg_source_edges += t.source.edge_count() as f64 / n;
            s.avg_target_edges += t.target.edge_count() as f64 / n;
            for g in [&t.source, &t.target] {
                for l in g.labels() {
                    node_occ += 1;
                    if !train_labels.contains(l) {
                        node_oov += 1;
                    }
                }
                for e in g.edges() {
                    edge_occ += 1;
                    let pair = (g.label(e.head).to_string(), g.label(e.tail).to_string());
                    if !train_edges.contains(&pair) {
                        edge_oov += 1;
                    }
                }
            }
        }
        if idx > 0 {
            s.oov_nodes_pct = Some(100.0 * node_oov as f64 / node_occ.max(1) as f64);
            s.oov_edges_pct = Some(100.0 * edge_oov as f64 / edge_occ.max(1) as f64);
        }
        out.push(s);
    }
    DatasetStats {
        splits: out,
        held_out_labels: held_out,
    }
}

/// Generates and writes `train.jsonl`, `dev.jsonl`, `test.jsonl`, and
/// `stats.txt` under `out_dir`, returning the stats.
pub fn generate_dataset(
    cfg: &GenConfig,
    vocab: &VocabConfig,
    out_dir: impl AsRef<Path>,
) -> Result<DatasetStats, DatagenError> {
    let dir = out_dir.as_ref();
    std::fs::create_dir_all(dir)
        .map_err(|e| DatagenError::InvalidConfig(format!("cannot create {}: {e}", dir.display())))?;
    let (train, dev, test, stats) = generate_splits(cfg, vocab)?;
    write_triples(dir.join("train.jsonl"), &train)?;
    write_triples(dir.join("dev.jsonl"), &dev)?;
    write_triples(dir.join("test.jsonl"), &test)?;
    let report = format!("{}\n{}", stats.table(), stats.machine_lines());
    std::fs::write(dir.join("stats.txt"), report)
        .map_err(|e| DatagenError::InvalidConfig(format!("cannot write stats: {e}")))?;
    Ok(stats)
}
