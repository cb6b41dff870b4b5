//! Shared token vocabulary and the generation vocabulary.
//!
//! Query tokens and node labels share one token <-> id map (with separate
//! embedding tables downstream). The generation vocabulary is the subset
//! the node decoder can emit directly: `DELETE`, `EOS`, `UNK`, plus every
//! label seen in training targets; everything else is reachable only
//! through the copy mechanism.

use std::collections::{BTreeMap, BTreeSet};

use graft_core::{Triple, DELETE_TOKEN, EOS_TOKEN, PAD_TOKEN, UNK_TOKEN};

/// Sentence-summary token prepended to every query.
pub const SENT_TOKEN: &str = "<s>";

const RESERVED: [&str; 5] = [PAD_TOKEN, UNK_TOKEN, DELETE_TOKEN, EOS_TOKEN, SENT_TOKEN];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    gen_tokens: Vec<String>,
    gen_index: BTreeMap<String, usize>,
}

impl Vocab {
    /// Builds the vocabulary from the training split.
    pub fn build(train: &[Triple]) -> Self {
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let mut target_labels: BTreeSet<&str> = BTreeSet::new();
        for t in train {
            for tok in &t.query {
                seen.insert(tok);
            }
            for l in t.source.labels() {
                seen.insert(l);
            }
            for l in t.target.labels() {
                seen.insert(l);
                target_labels.insert(l);
            }
        }
        let tokens: Vec<String> = RESERVED
            .iter()
            .map(|s| s.to_string())
            .chain(seen.iter().map(|s| s.to_string()))
            .collect();
        let gen_tokens: Vec<String> = [DELETE_TOKEN, EOS_TOKEN, UNK_TOKEN]
            .iter()
            .map(|s| s.to_string())
            .chain(target_labels.iter().map(|s| s.to_string()))
            .collect();
        Self::from_lists(tokens, gen_tokens)
    }

    /// Rebuilds from checkpointed token lists.
    pub fn from_lists(tokens: Vec<String>, gen_tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        let gen_index = gen_tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            tokens,
            index,
            gen_tokens,
            gen_index,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn gen_len(&self) -> usize {
        self.gen_tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn gen_tokens(&self) -> &[String] {
        &self.gen_tokens
    }

    /// Shared id, substituting `UNK` for out-of-vocabulary tokens.
    pub fn id_or_unk(&self, token: &str) -> usize {
        self.index
            .get(token)
            .copied()
            .unwrap_or_else(|| self.index[UNK_TOKEN])
    }

    pub fn sent_id(&self) -> usize {
        self.index[SENT_TOKEN]
    }

    pub fn gen_id(&self, label: &str) -> Option<usize> {
        self.gen_index.get(label).copied()
    }

    pub fn gen_label(&self, idx: usize) -> &str {
        &self.gen_tokens[idx]
    }

    pub fn eos_gen_id(&self) -> usize {
        self.gen_index[EOS_TOKEN]
    }

    pub fn delete_gen_id(&self) -> usize {
        self.gen_index[DELETE_TOKEN]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use graft_core::SceneGraph;

    fn triple() -> Triple {
        Triple {
            source: SceneGraph::from_parts(["boy", "racket"], [(0, 1)]).unwrap(),
            query: vec!["show".into(), "me".into(), "girl".into()],
            target: SceneGraph::from_parts(["girl", "racket"], [(0, 1)]).unwrap(),
        }
    }

    #[test]
    fn reserved_tokens_lead() {
        let v = Vocab::build(&[triple()]);
        assert_eq!(&v.tokens()[..5], &["PAD", "UNK", "DELETE", "EOS", "<s>"]);
        assert_eq!(v.id_or_unk("boy"), v.index["boy"]);
        assert_eq!(v.id_or_unk("nonexistent"), 1);
    }

    #[test]
    fn gen_vocab_covers_target_labels_only() {
        let v = Vocab::build(&[triple()]);
        assert!(v.gen_id("girl").is_some());
        assert!(v.gen_id("racket").is_some());
        // "boy" appears only in the source, never generated
        assert!(v.gen_id("boy").is_none());
        assert_eq!(v.gen_label(v.eos_gen_id()), "EOS");
        assert_eq!(v.gen_label(v.delete_gen_id()), "DELETE");
        assert!(v.gen_id("UNK").is_some());
    }

    #[test]
    fn build_is_deterministic() {
        let a = Vocab::build(&[triple()]);
        let b = Vocab::build(&[triple()]);
        assert_eq!(a, b);
        let rebuilt = Vocab::from_lists(a.tokens().to_vec(), a.gen_tokens().to_vec());
        assert_eq!(a, rebuilt);
    }
}
