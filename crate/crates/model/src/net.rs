//! The expansion network.
//!
//! One expansion step runs: fuse the query and graph encodings into the
//! expansion state, score attachment edges against every existing node
//! (max over attention heads, both directions), fold the edge information
//! back into the state, predict the new node through the generate/copy
//! mixture, fold the node information back, and carry the state to the
//! next step.

use std::collections::BTreeMap;

use graft_core::Rng;
use graft_tensor::{
    attention_weights, causal_mask, AttentionBankParams, ParamStore, Scalar, Tape, Tensor, Var,
};

use crate::config::ModelConfig;
use crate::error::ModelError;
use crate::layers::{positional_encoding, FusionBlock, Linear, TransformerBlock, UpdateBlock};
use crate::vocab::Vocab;

/// Contextualized query tokens: row 0 is the prepended sentence token.
#[derive(Debug, Clone, Copy)]
pub struct QueryEncoding {
    pub var: Var,
    /// real token count (rows = tokens + 1)
    pub tokens: usize,
}

/// Contextualized node sequence; row `t` depends only on nodes `<= t`.
#[derive(Debug, Clone, Copy)]
pub struct GraphEncoding {
    pub var: Var,
    pub len: usize,
}

/// Attachment probabilities for the node about to be created: one
/// independent probability per existing node per direction, computed as
/// the maximum attention weight across heads.
#[derive(Debug, Clone)]
pub struct EdgePrediction {
    /// new -> existing, `1 x m`
    pub out_probs: Var,
    /// existing -> new, `1 x m`
    pub in_probs: Var,
    pub out_heads: Vec<Var>,
    pub in_heads: Vec<Var>,
}

/// Mixture distribution over the next node label: generation vocabulary
/// blended with copy attention over the query tokens.
#[derive(Debug, Clone)]
pub struct NodeDistribution {
    /// softmax over the generation vocabulary, `1 x |gen|`
    pub p_vocab: Var,
    /// copy attention over real query positions, `1 x n`
    pub copy_attn: Var,
    /// `[p_gen, p_copy]`, `1 x 2`
    pub gate: Var,
    query_tokens: Vec<String>,
}

/// All wiring of the network: parameter names grouped by component.
#[derive(Debug, Clone)]
struct Wiring {
    query_blocks: Vec<TransformerBlock>,
    graph_blocks: Vec<TransformerBlock>,
    fusion_blocks: Vec<FusionBlock>,
    word_proj: Linear,
    concept_proj: Linear,
    edge_out_bank: AttentionBankParams,
    edge_in_bank: AttentionBankParams,
    edge_update: UpdateBlock,
    node_update: UpdateBlock,
    copy_bank: AttentionBankParams,
    vocab_out: Linear,
    gate: Linear,
}

const WORD_EMB: &str = "embedding.word";
const CONCEPT_EMB: &str = "embedding.concept";

pub struct Model<S: Scalar> {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub store: ParamStore<S>,
    wiring: Wiring,
}

impl<S: Scalar> Model<S> {
    /// Fresh model with randomly initialized parameters.
    pub fn new(config: ModelConfig, vocab: Vocab, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = Rng::derive(seed, &[0xA11C]);
        let mut store = ParamStore::new();
        let wiring = Self::build_wiring(&config, &vocab, &mut store, &mut rng)?;
        Ok(Self {
            config,
            vocab,
            store,
            wiring,
        })
    }

    /// Rebuilds a model around checkpointed parameters, verifying that the
    /// parameter set matches the config exactly.
    pub fn from_store(
        config: ModelConfig,
        vocab: Vocab,
        store: ParamStore<S>,
    ) -> Result<Self, ModelError> {
        config.validate()?;
        let mut scratch = ParamStore::new();
        let mut rng = Rng::new(0);
        let wiring = Self::build_wiring(&config, &vocab, &mut scratch, &mut rng)?;
        for (name, expected) in scratch.iter() {
            let loaded = store
                .get(name)
                .map_err(|_| ModelError::ConfigMismatch(format!("missing parameter {name}")))?;
            if !loaded.same_shape(expected) {
                return Err(ModelError::ConfigMismatch(format!(
                    "parameter {name} has shape {}, expected {}",
                    loaded.shape_string(),
                    expected.shape_string()
                )));
            }
        }
        if store.len() != scratch.len() {
            return Err(ModelError::ConfigMismatch(format!(
                "checkpoint has {} parameters, model expects {}",
                store.len(),
                scratch.len()
            )));
        }
        Ok(Self {
            config,
            vocab,
            store,
            wiring,
        })
    }

    fn build_wiring(
        config: &ModelConfig,
        vocab: &Vocab,
        store: &mut ParamStore<S>,
        rng: &mut Rng,
    ) -> Result<Wiring, ModelError> {
        let d = config.hidden_dim;
        store.add_embedding(WORD_EMB, vocab.len(), config.word_emb_dim, rng);
        store.add_embedding(CONCEPT_EMB, vocab.len(), config.concept_emb_dim, rng);
        let word_proj = Linear::init(store, "query.proj", config.word_emb_dim, d, true, rng);
        let concept_proj =
            Linear::init(store, "graph.proj", config.concept_emb_dim, d, true, rng);

        let block = |store: &mut ParamStore<S>, prefix: String, rng: &mut Rng| {
            TransformerBlock::init(
                store,
                &prefix,
                d,
                config.ffn_dim,
                config.heads,
                config.dropout,
                rng,
            )
        };
        let query_blocks = (0..config.query_layers)
            .map(|i| block(store, format!("query.layer{i}"), rng))
            .collect::<Result<_, _>>()?;
        let graph_blocks = (0..config.graph_layers)
            .map(|i| block(store, format!("graph.layer{i}"), rng))
            .collect::<Result<_, _>>()?;
        let fusion_blocks = (0..config.fusion_layers)
            .map(|i| {
                FusionBlock::init(
                    store,
                    &format!("fusion.layer{i}"),
                    d,
                    config.ffn_dim,
                    config.heads,
                    config.dropout,
                    rng,
                )
            })
            .collect::<Result<_, _>>()?;

        let edge_out_bank =
            AttentionBankParams::init(store, "edge.out_bank", d, config.heads, rng)?;
        let edge_in_bank = AttentionBankParams::init(store, "edge.in_bank", d, config.heads, rng)?;
        let edge_update =
            UpdateBlock::init(store, "edge.update", d, config.heads, config.dropout, rng)?;
        let node_update =
            UpdateBlock::init(store, "node.update", d, config.heads, config.dropout, rng)?;
        let copy_bank = AttentionBankParams::init(store, "node.copy", d, 1, rng)?;
        let vocab_out = Linear::init(store, "node.vocab", d, vocab.gen_len(), true, rng);
        let gate = Linear::init(store, "node.gate", d, 2, false, rng);

        Ok(Wiring {
            query_blocks,
            graph_blocks,
            fusion_blocks,
            word_proj,
            concept_proj,
            edge_out_bank,
            edge_in_bank,
            edge_update,
            node_update,
            copy_bank,
            vocab_out,
            gate,
        })
    }

    /// Encodes a query: embed, project to the hidden size, add sinusoidal
    /// positions, run the query transformer stack. Row 0 holds the
    /// prepended sentence token.
    pub fn encode_query(
        &self,
        tape: &mut Tape<S>,
        tokens: &[String],
        train: bool,
    ) -> Result<QueryEncoding, ModelError> {
        if tokens.is_empty() {
            return Err(ModelError::EmptyQuery);
        }
        let mut ids = Vec::with_capacity(tokens.len() + 1);
        ids.push(self.vocab.sent_id());
        ids.extend(tokens.iter().map(|t| self.vocab.id_or_unk(t)));

        let table = tape.param(&self.store, WORD_EMB)?;
        let emb = tape.embedding(table, &ids)?;
        let projected = self.wiring.word_proj.forward(tape, &self.store, emb)?;
        let pe = positional_encoding::<S>(ids.len(), self.config.hidden_dim);
        let mut x = tape.add_const(projected, &pe)?;
        x = tape.dropout(x, self.config.dropout, train)?;
        for block in &self.wiring.query_blocks {
            x = block.forward(tape, &self.store, x, None, train)?;
        }
        Ok(QueryEncoding {
            var: x,
            tokens: tokens.len(),
        })
    }

    /// Encodes the expansion-time node sequence with causal masking, so
    /// row `t` never changes as later nodes are appended.
    pub fn encode_graph(
        &self,
        tape: &mut Tape<S>,
        labels: &[String],
        train: bool,
    ) -> Result<GraphEncoding, ModelError> {
        if labels.is_empty() {
            let var = tape.value(Tensor::zeros(0, self.config.hidden_dim));
            return Ok(GraphEncoding { var, len: 0 });
        }
        let ids: Vec<usize> = labels.iter().map(|l| self.vocab.id_or_unk(l)).collect();
        let table = tape.param(&self.store, CONCEPT_EMB)?;
        let emb = tape.embedding(table, &ids)?;
        let mut y = self.wiring.concept_proj.forward(tape, &self.store, emb)?;
        y = tape.dropout(y, self.config.dropout, train)?;
        let mask = causal_mask::<S>(labels.len());
        for block in &self.wiring.graph_blocks {
            y = block.forward(tape, &self.store, y, Some(&mask), train)?;
        }
        Ok(GraphEncoding {
            var: y,
            len: labels.len(),
        })
    }

    /// The initial expansion state: the sentence-token row of the query
    /// encoding.
    pub fn initial_state(&self, tape: &mut Tape<S>, query: &QueryEncoding) -> Result<Var, ModelError> {
        Ok(tape.slice(query.var, 0, 0, 1)?)
    }

    /// Runs the stacked fusion blocks, combining the query and the current
    /// graph into the next expansion state.
    pub fn fuse(
        &self,
        tape: &mut Tape<S>,
        h: Var,
        query: &QueryEncoding,
        graph: &GraphEncoding,
        train: bool,
    ) -> Result<Var, ModelError> {
        let mut state = h;
        for block in &self.wiring.fusion_blocks {
            state = block.forward(tape, &self.store, state, query.var, graph.var, train)?;
        }
        Ok(state)
    }

    /// Scores attachments between the upcoming node and every existing
    /// node: per direction, the maximum over that bank's attention heads.
    /// No normalization across nodes; each cell is an independent
    /// probability.
    pub fn predict_edges(
        &self,
        tape: &mut Tape<S>,
        h: Var,
        graph: &GraphEncoding,
    ) -> Result<EdgePrediction, ModelError> {
        if graph.len == 0 {
            return Err(ModelError::EmptyGraph);
        }
        let mut run = |bank: &AttentionBankParams| -> Result<(Var, Vec<Var>), ModelError> {
            let heads = attention_weights(tape, &self.store, bank, h, graph.var, None)?;
            let stacked = tape.concat(&heads, 0)?;
            let probs = tape.max_over_rows(stacked)?;
            Ok((probs, heads))
        };
        let (out_probs, out_heads) = run(&self.wiring.edge_out_bank)?;
        let (in_probs, in_heads) = run(&self.wiring.edge_in_bank)?;
        Ok(EdgePrediction {
            out_probs,
            in_probs,
            out_heads,
            in_heads,
        })
    }

    /// Folds edge information back into the state: `LN(MSA(h, y) + h)`.
    pub fn update_state_after_edges(
        &self,
        tape: &mut Tape<S>,
        h: Var,
        graph: &GraphEncoding,
        train: bool,
    ) -> Result<Var, ModelError> {
        self.wiring
            .edge_update
            .forward(tape, &self.store, h, graph.var, train)
    }

    /// Mixture distribution over the next node label.
    pub fn predict_node(
        &self,
        tape: &mut Tape<S>,
        h: Var,
        query: &QueryEncoding,
        query_tokens: &[String],
    ) -> Result<NodeDistribution, ModelError> {
        let logits = self.wiring.vocab_out.forward(tape, &self.store, h)?;
        let p_vocab = tape.softmax(logits, 1)?;

        // copy attention over real token positions (sentence token excluded)
        let real = tape.slice(query.var, 0, 1, query.tokens + 1)?;
        let heads = attention_weights(tape, &self.store, &self.wiring.copy_bank, h, real, None)?;
        let copy_attn = heads[0];

        let gate_logits = self.wiring.gate.forward(tape, &self.store, h)?;
        let gate = tape.softmax(gate_logits, 1)?;

        Ok(NodeDistribution {
            p_vocab,
            copy_attn,
            gate,
            query_tokens: query_tokens.to_vec(),
        })
    }

    /// Folds the chosen node back into the state: `LN(MSA(h, x) + h)`.
    /// The result is the carry-in state for the next step.
    pub fn update_state_after_node(
        &self,
        tape: &mut Tape<S>,
        h: Var,
        query: &QueryEncoding,
        train: bool,
    ) -> Result<Var, ModelError> {
        self.wiring
            .node_update
            .forward(tape, &self.store, h, query.var, train)
    }
}

impl NodeDistribution {
    /// `P(label)` as a differentiable scalar:
    /// `p_gen * P_vocab(label) + p_copy * sum of copy attention at the
    /// query positions whose surface form equals the label`.
    pub fn prob_of<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        vocab: &Vocab,
        label: &str,
    ) -> Result<Var, ModelError> {
        let p_gen = tape.gather_sum(self.gate, &[0])?;
        let p_copy = tape.gather_sum(self.gate, &[1])?;
        let mut total: Option<Var> = None;
        if let Some(idx) = vocab.gen_id(label) {
            let p = tape.gather_sum(self.p_vocab, &[idx])?;
            let term = tape.scale_by(p, p_gen)?;
            total = Some(term);
        }
        let positions: Vec<usize> = self
            .query_tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.as_str() == label)
            .map(|(i, _)| i)
            .collect();
        if !positions.is_empty() {
            let mass = tape.gather_sum(self.copy_attn, &positions)?;
            let term = tape.scale_by(mass, p_copy)?;
            total = Some(match total {
                Some(t) => tape.add(t, term)?,
                None => term,
            });
        }
        Ok(match total {
            Some(t) => t,
            None => tape.value(Tensor::scalar(S::zero())),
        })
    }

    /// The full mixture over surface forms, evaluated to plain floats.
    /// Generation-vocabulary mass and copy mass for the same surface form
    /// are summed.
    pub fn surface_distribution<S: Scalar>(
        &self,
        tape: &Tape<S>,
        vocab: &Vocab,
    ) -> BTreeMap<String, f64> {
        let gate = tape.get(self.gate);
        let p_gen = gate.at(0, 0).to_f64().unwrap_or(0.0);
        let p_copy = gate.at(0, 1).to_f64().unwrap_or(0.0);
        let mut dist: BTreeMap<String, f64> = BTreeMap::new();
        let pv = tape.get(self.p_vocab);
        for (i, label) in vocab.gen_tokens().iter().enumerate() {
            *dist.entry(label.clone()).or_insert(0.0) +=
                p_gen * pv.at(0, i).to_f64().unwrap_or(0.0);
        }
        let ca = tape.get(self.copy_attn);
        for (i, token) in self.query_tokens.iter().enumerate() {
            *dist.entry(token.clone()).or_insert(0.0) +=
                p_copy * ca.at(0, i).to_f64().unwrap_or(0.0);
        }
        dist
    }

    /// Greedy pick over the surface distribution; ties break toward the
    /// lexicographically smaller form, so decoding is deterministic.
    pub fn argmax<S: Scalar>(&self, tape: &Tape<S>, vocab: &Vocab) -> String {
        let dist = self.surface_distribution(tape, vocab);
        let mut best: Option<(&String, f64)> = None;
        for (label, p) in &dist {
            match best {
                Some((_, bp)) if *p <= bp => {}
                _ => best = Some((label, *p)),
            }
        }
        best.map(|(l, _)| l.clone()).unwrap_or_default()
    }
}
