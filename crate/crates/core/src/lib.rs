//! Graph-side foundations for learning to modify scene graphs from text:
//! the data model with canonical serialization, the expansion-action
//! oracle, the synthetic triple generator, and the JSONL triple format.

pub mod canon;
pub mod datagen;
pub mod dot;
pub mod graph;
pub mod oracle;
pub mod rng;
pub mod triple;

pub use graph::{
    Edge, ExtendedGraph, GraphError, Node, NodeId, SceneGraph, DELETE_TOKEN, EOS_TOKEN, PAD_TOKEN,
    RESERVED_TOKENS, UNK_TOKEN,
};
pub use oracle::{
    align_nodes, apply_actions, derive_actions, reduce_extended, roundtrip_check, ActionSequence,
    Alignment, Attachment, Direction, ExpansionAction, OracleError,
};
pub use rng::Rng;
pub use triple::{canonical_labels, read_triples, write_triples, Triple, TripleIoError};
