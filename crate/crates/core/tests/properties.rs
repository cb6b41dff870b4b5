//! Cross-module properties: canonical-form invariance, triple-file
//! round trips, and the oracle round trip over generated data.

use proptest::prelude::*;

use graft_core::datagen::{generate_splits, GenConfig, Profile, VocabConfig};
use graft_core::{derive_actions, read_triples, roundtrip_check, write_triples, Rng, SceneGraph};

/// Random connected-ish graph with distinct labels (the regime the
/// generator produces).
fn arb_unique_label_graph() -> impl Strategy<Value = SceneGraph> {
    (2usize..9).prop_flat_map(|n| {
        let labels: Vec<String> = (0..n).map(|i| format!("node{i}")).collect();
        let edges = proptest::collection::vec((0..n, 0..n), 0..(2 * n));
        edges.prop_map(move |raw| {
            let mut g = SceneGraph::from_parts(&labels, []).unwrap();
            for (h, t) in raw {
                if h != t {
                    g.add_edge(graft_core::NodeId(h), graft_core::NodeId(t)).unwrap();
                }
            }
            g
        })
    })
}

fn arb_permutation(n: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..n).collect::<Vec<usize>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn serialization_invariant_under_id_permutation(g in arb_unique_label_graph(), seed in any::<u64>()) {
        let mut rng = Rng::new(seed);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        rng.shuffle(&mut perm);
        let h = g.permuted(&perm);
        prop_assert_eq!(g.canonical_serialize(), h.canonical_serialize());
    }

    #[test]
    fn canonical_order_is_bijection(g in arb_unique_label_graph()) {
        let order = g.canonical_order();
        let mut sorted: Vec<usize> = order.iter().map(|id| id.index()).collect();
        sorted.sort();
        let expect: Vec<usize> = (0..g.node_count()).collect();
        prop_assert_eq!(sorted, expect);
        // deterministic across calls
        prop_assert_eq!(order, g.canonical_order());
    }

    #[test]
    fn isomorphic_relabelings_map_orders(g in arb_unique_label_graph(), perm_seed in any::<u64>()) {
        let mut rng = Rng::new(perm_seed);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        rng.shuffle(&mut perm);
        let h = g.permuted(&perm);
        let g_labels: Vec<String> = g.canonical_order().iter().map(|&i| g.label(i).to_string()).collect();
        let h_labels: Vec<String> = h.canonical_order().iter().map(|&i| h.label(i).to_string()).collect();
        prop_assert_eq!(g_labels, h_labels);
    }
}

#[test]
fn oracle_roundtrip_holds_on_generated_triples() {
    let vocab = VocabConfig::builtin();
    for profile in [Profile::User, Profile::Mscoco, Profile::Gcc, Profile::Rsicd] {
        let cfg = GenConfig::new(profile, 2024, 80, 10, 10);
        let (train, dev, test, _) = generate_splits(&cfg, &vocab).unwrap();
        for t in train.iter().chain(&dev).chain(&test) {
            assert!(
                roundtrip_check(&t.source, &t.target),
                "round trip failed on {} profile",
                profile.name()
            );
        }
    }
}

#[test]
fn derive_actions_depends_only_on_canonical_form() {
    let vocab = VocabConfig::builtin();
    let cfg = GenConfig::new(Profile::Gcc, 555, 40, 1, 1);
    let (train, _, _, _) = generate_splits(&cfg, &vocab).unwrap();
    let mut rng = Rng::new(9);
    for t in &train {
        let mut perm: Vec<usize> = (0..t.source.node_count()).collect();
        rng.shuffle(&mut perm);
        let shuffled_source = t.source.permuted(&perm);
        let mut perm_t: Vec<usize> = (0..t.target.node_count()).collect();
        rng.shuffle(&mut perm_t);
        let shuffled_target = t.target.permuted(&perm_t);
        assert_eq!(
            derive_actions(&t.source, &t.target),
            derive_actions(&shuffled_source, &shuffled_target),
            "action sequences must not depend on node numbering"
        );
    }
}

#[test]
fn triple_files_reach_write_fixpoint() {
    let vocab = VocabConfig::builtin();
    let cfg = GenConfig::new(Profile::Rsicd, 31, 100, 1, 1);
    let (train, _, _, _) = generate_splits(&cfg, &vocab).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("a.jsonl");
    let second = dir.path().join("b.jsonl");
    write_triples(&first, &train).unwrap();
    let back = read_triples(&first).unwrap();
    write_triples(&second, &back).unwrap();
    let a = std::fs::read(&first).unwrap();
    let b = std::fs::read(&second).unwrap();
    assert_eq!(a, b, "read-then-write must be byte-identical");
    assert_eq!(back, read_triples(&second).unwrap());
}
