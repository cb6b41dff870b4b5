//! Reusable blocks: linear projections, post-norm transformer blocks
//! (`x' = LN(MSA(x) + x); x = LN(FFN(x') + x')`), the two-encoder fusion
//! block, and the single-attention state updates.

use graft_core::Rng;
use graft_tensor::{multi_head_attention, MhaParams, ParamStore, Scalar, Tape, Tensor, Var};

use crate::error::ModelError;

/// Sinusoidal positional encoding for `len` positions at width `dim`.
pub fn positional_encoding<S: Scalar>(len: usize, dim: usize) -> Tensor<S> {
    let mut pe = Tensor::zeros(len, dim);
    for pos in 0..len {
        for i in 0..dim {
            let exponent = (2 * (i / 2)) as f64 / dim as f64;
            let angle = pos as f64 / 10000f64.powf(exponent);
            let v = if i % 2 == 0 { angle.sin() } else { angle.cos() };
            pe.set(pos, i, S::lit(v));
        }
    }
    pe
}

/// `y = x W + b`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub w: String,
    pub b: Option<String>,
}

impl Linear {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        rows: usize,
        cols: usize,
        bias: bool,
        rng: &mut Rng,
    ) -> Self {
        let w = format!("{prefix}.w");
        store.add_matrix(&w, rows, cols, rng);
        let b = bias.then(|| {
            let b = format!("{prefix}.b");
            store.add_zeros(&b, 1, cols);
            b
        });
        Self { w, b }
    }

    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        x: Var,
    ) -> Result<Var, ModelError> {
        let w = tape.param(store, &self.w)?;
        let mut y = tape.matmul(x, w)?;
        if let Some(bias) = &self.b {
            let b = tape.param(store, bias)?;
            y = tape.add_bias(y, b)?;
        }
        Ok(y)
    }
}

/// Learned layer-norm gain/bias pair.
#[derive(Debug, Clone)]
pub struct Norm {
    pub gain: String,
    pub bias: String,
}

pub const LN_EPS: f64 = 1e-5;

impl Norm {
    pub fn init<S: Scalar>(store: &mut ParamStore<S>, prefix: &str, dim: usize) -> Self {
        let gain = format!("{prefix}.gain");
        let bias = format!("{prefix}.bias");
        store.add_ones(&gain, dim);
        store.add_zeros(&bias, 1, dim);
        Self { gain, bias }
    }

    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        x: Var,
    ) -> Result<Var, ModelError> {
        let gain = tape.param(store, &self.gain)?;
        let bias = tape.param(store, &self.bias)?;
        Ok(tape.layer_norm(x, gain, bias, LN_EPS)?)
    }
}

/// Position-wise feed-forward: `W2 relu(W1 x + b1) + b2`.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub inner: Linear,
    pub outer: Linear,
}

impl FeedForward {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        dim: usize,
        ffn_dim: usize,
        rng: &mut Rng,
    ) -> Self {
        Self {
            inner: Linear::init(store, &format!("{prefix}.in"), dim, ffn_dim, true, rng),
            outer: Linear::init(store, &format!("{prefix}.out"), ffn_dim, dim, true, rng),
        }
    }

    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        x: Var,
    ) -> Result<Var, ModelError> {
        let hidden = self.inner.forward(tape, store, x)?;
        let act = tape.relu(hidden)?;
        self.outer.forward(tape, store, act)
    }
}

/// Self-attention transformer block, post-norm as in the encoder
/// equations: `x' = LN(MSA(x) + x)`, `x'' = LN(FFN(x') + x')`. Dropout is
/// applied to each sublayer output before its residual add.
#[derive(Debug, Clone)]
pub struct TransformerBlock {
    pub mha: MhaParams,
    pub norm1: Norm,
    pub ffn: FeedForward,
    pub norm2: Norm,
    pub dropout: f64,
}

impl TransformerBlock {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        dim: usize,
        ffn_dim: usize,
        heads: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            mha: MhaParams::init(store, &format!("{prefix}.attn"), dim, heads, rng)?,
            norm1: Norm::init(store, &format!("{prefix}.norm1"), dim),
            ffn: FeedForward::init(store, &format!("{prefix}.ffn"), dim, ffn_dim, rng),
            norm2: Norm::init(store, &format!("{prefix}.norm2"), dim),
            dropout,
        })
    }

    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        x: Var,
        mask: Option<&Tensor<S>>,
        train: bool,
    ) -> Result<Var, ModelError> {
        let (attended, _) = multi_head_attention(tape, store, &self.mha, x, x, mask)?;
        let attended = tape.dropout(attended, self.dropout, train)?;
        let residual = tape.add(attended, x)?;
        let x1 = self.norm1.forward(tape, store, residual)?;

        let ff = self.ffn.forward(tape, store, x1)?;
        let ff = tape.dropout(ff, self.dropout, train)?;
        let residual = tape.add(ff, x1)?;
        self.norm2.forward(tape, store, residual)
    }
}

/// One feature-fusion block: attend over the query tokens, then over the
/// graph nodes, then feed-forward, each sublayer with residual + norm.
#[derive(Debug, Clone)]
pub struct FusionBlock {
    pub over_query: MhaParams,
    pub norm1: Norm,
    pub over_graph: MhaParams,
    pub norm2: Norm,
    pub ffn: FeedForward,
    pub norm3: Norm,
    pub dropout: f64,
}

impl FusionBlock {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        dim: usize,
        ffn_dim: usize,
        heads: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            over_query: MhaParams::init(store, &format!("{prefix}.query_attn"), dim, heads, rng)?,
            norm1: Norm::init(store, &format!("{prefix}.norm1"), dim),
            over_graph: MhaParams::init(store, &format!("{prefix}.graph_attn"), dim, heads, rng)?,
            norm2: Norm::init(store, &format!("{prefix}.norm2"), dim),
            ffn: FeedForward::init(store, &format!("{prefix}.ffn"), dim, ffn_dim, rng),
            norm3: Norm::init(store, &format!("{prefix}.norm3"), dim),
            dropout,
        })
    }

    /// `h (1 x d)`, `query (n+1 x d)`, `graph (m x d)`; an empty graph
    /// contributes a zero attention output.
    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        h: Var,
        query: Var,
        graph: Var,
        train: bool,
    ) -> Result<Var, ModelError> {
        let (a, _) = multi_head_attention(tape, store, &self.over_query, h, query, None)?;
        let a = tape.dropout(a, self.dropout, train)?;
        let sum = tape.add(a, h)?;
        let z = self.norm1.forward(tape, store, sum)?;

        let (b, _) = multi_head_attention(tape, store, &self.over_graph, z, graph, None)?;
        let b = tape.dropout(b, self.dropout, train)?;
        let sum = tape.add(b, z)?;
        let z2 = self.norm2.forward(tape, store, sum)?;

        let f = self.ffn.forward(tape, store, z2)?;
        let f = tape.dropout(f, self.dropout, train)?;
        let sum = tape.add(f, z2)?;
        self.norm3.forward(tape, store, sum)
    }
}

/// State update `h' = LN(MSA(h, kv) + h)` used after edge and node
/// decisions.
#[derive(Debug, Clone)]
pub struct UpdateBlock {
    pub mha: MhaParams,
    pub norm: Norm,
    pub dropout: f64,
}

impl UpdateBlock {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        dim: usize,
        heads: usize,
        dropout: f64,
        rng: &mut Rng,
    ) -> Result<Self, ModelError> {
        Ok(Self {
            mha: MhaParams::init(store, &format!("{prefix}.attn"), dim, heads, rng)?,
            norm: Norm::init(store, &format!("{prefix}.norm"), dim),
            dropout,
        })
    }

    pub fn forward<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        store: &ParamStore<S>,
        h: Var,
        kv: Var,
        train: bool,
    ) -> Result<Var, ModelError> {
        let (a, _) = multi_head_attention(tape, store, &self.mha, h, kv, None)?;
        let a = tape.dropout(a, self.dropout, train)?;
        let sum = tape.add(a, h)?;
        self.norm.forward(tape, store, sum)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn positional_encoding_rows_depend_only_on_own_index() {
        let short: Tensor<f64> = positional_encoding(3, 8);
        let long: Tensor<f64> = positional_encoding(10, 8);
        for r in 0..3 {
            assert_eq!(short.row_slice(r), long.row_slice(r));
        }
    }

    #[test]
    fn positional_encoding_first_row_is_sin0_cos0() {
        let pe: Tensor<f64> = positional_encoding(2, 6);
        for i in 0..6 {
            let expect = if i % 2 == 0 { 0.0 } else { 1.0 };
            assert_eq!(pe.at(0, i), expect);
        }
    }

    #[test]
    fn transformer_block_keeps_shape_and_determinism() {
        let mut rng = Rng::new(4);
        let mut store: ParamStore<f64> = ParamStore::new();
        let block = TransformerBlock::init(&mut store, "b", 16, 32, 4, 0.2, &mut rng).unwrap();
        let input = Tensor::from_vec(5, 16, (0..80).map(|i| (i as f64 * 0.37).sin()).collect());
        let run = || {
            let mut tape = Tape::no_grad();
            let x = tape.value(input.clone());
            let y = block.forward(&mut tape, &store, x, None, false).unwrap();
            tape.get(y).clone()
        };
        let a = run();
        assert_eq!((a.rows(), a.cols()), (5, 16));
        assert_eq!(a, run(), "dropout-off forward must be deterministic");
        assert!(a.all_finite());
    }
}
