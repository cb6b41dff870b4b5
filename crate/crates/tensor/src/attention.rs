//! Multi-head scaled dot-product attention with learned projections.
//!
//! Two flavors: the full block (Q/K/V/output projections, used by the
//! encoders, fusion, and state updates) and a weights-only bank (Q/K
//! projections, used by the edge decoder, which consumes the per-head
//! attention weights directly as edge probabilities).
//!
//! Keys carry no bias: a per-key bias shifts every score in a query's row
//! by the same amount, which the softmax cancels, leaving the parameter
//! with an identically zero gradient.

use graft_core::Rng;

use crate::error::TensorError;
use crate::params::ParamStore;
use crate::scalar::Scalar;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Query/key projections producing attention weights.
#[derive(Debug, Clone)]
pub struct AttentionBankParams {
    pub w_q: String,
    pub b_q: String,
    pub w_k: String,
    pub heads: usize,
    pub dim: usize,
}

impl AttentionBankParams {
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        dim: usize,
        heads: usize,
        rng: &mut Rng,
    ) -> Result<Self, TensorError> {
        check_heads(dim, heads)?;
        let name = |suffix: &str| format!("{prefix}.{suffix}");
        store.add_matrix(&name("w_q"), dim, dim, rng);
        store.add_zeros(&name("b_q"), 1, dim);
        store.add_matrix(&name("w_k"), dim, dim, rng);
        Ok(Self {
            w_q: name("w_q"),
            b_q: name("b_q"),
            w_k: name("w_k"),
            heads,
            dim,
        })
    }
}

/// Parameter names for one full attention block.
#[derive(Debug, Clone)]
pub struct MhaParams {
    pub bank: AttentionBankParams,
    pub w_v: String,
    pub b_v: String,
    pub w_o: String,
    pub b_o: String,
}

impl MhaParams {
    /// Registers freshly initialized projections under `prefix.*`.
    pub fn init<S: Scalar>(
        store: &mut ParamStore<S>,
        prefix: &str,
        dim: usize,
        heads: usize,
        rng: &mut Rng,
    ) -> Result<Self, TensorError> {
        let bank = AttentionBankParams::init(store, prefix, dim, heads, rng)?;
        let name = |suffix: &str| format!("{prefix}.{suffix}");
        store.add_matrix(&name("w_v"), dim, dim, rng);
        store.add_zeros(&name("b_v"), 1, dim);
        store.add_matrix(&name("w_o"), dim, dim, rng);
        store.add_zeros(&name("b_o"), 1, dim);
        Ok(Self {
            bank,
            w_v: name("w_v"),
            b_v: name("b_v"),
            w_o: name("w_o"),
            b_o: name("b_o"),
        })
    }
}

fn check_heads(dim: usize, heads: usize) -> Result<(), TensorError> {
    if heads == 0 || dim % heads != 0 {
        Err(TensorError::HeadSplit { dim, heads })
    } else {
        Ok(())
    }
}

/// Additive causal mask: position `i` may attend to positions `<= i`.
pub fn causal_mask<S: Scalar>(len: usize) -> Tensor<S> {
    let mut mask = Tensor::zeros(len, len);
    for r in 0..len {
        for c in (r + 1)..len {
            mask.set(r, c, S::neg_infinity());
        }
    }
    mask
}

/// Per-head attention weights of `query` against `kv`: `heads` tensors of
/// shape `(query_len x kv_len)`, each row a softmax distribution. The
/// optional mask is added to the scores before normalization.
pub fn attention_weights<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    bank: &AttentionBankParams,
    query: Var,
    kv: Var,
    mask: Option<&Tensor<S>>,
) -> Result<Vec<Var>, TensorError> {
    let dim = tape.get(query).cols();
    check_heads(dim, bank.heads)?;
    if tape.get(kv).rows() == 0 {
        return Err(TensorError::Empty { op: "attention" });
    }
    let head_dim = dim / bank.heads;
    let scale = 1.0 / (head_dim as f64).sqrt();

    let wq = tape.param(store, &bank.w_q)?;
    let bq = tape.param(store, &bank.b_q)?;
    let wk = tape.param(store, &bank.w_k)?;
    let q_all = tape.matmul(query, wq)?;
    let q_all = tape.add_bias(q_all, bq)?;
    let k_all = tape.matmul(kv, wk)?;

    let mut weights = Vec::with_capacity(bank.heads);
    for h in 0..bank.heads {
        let (lo, hi) = (h * head_dim, (h + 1) * head_dim);
        let qh = tape.slice(q_all, 1, lo, hi)?;
        let kh = tape.slice(k_all, 1, lo, hi)?;
        let scores = tape.matmul_nt(qh, kh)?;
        let mut scores = tape.scale(scores, scale)?;
        if let Some(m) = mask {
            scores = tape.add_const(scores, m)?;
        }
        weights.push(tape.softmax(scores, 1)?);
    }
    Ok(weights)
}

/// Full multi-head attention. Returns the projected output
/// `(query_len x dim)` and the per-head weights. An empty key/value
/// sequence yields a zero output and no weights.
pub fn multi_head_attention<S: Scalar>(
    tape: &mut Tape<S>,
    store: &ParamStore<S>,
    params: &MhaParams,
    query: Var,
    kv: Var,
    mask: Option<&Tensor<S>>,
) -> Result<(Var, Vec<Var>), TensorError> {
    let (q_len, dim) = tape.shape_of(query);
    if tape.get(kv).rows() == 0 {
        let out = tape.value(Tensor::zeros(q_len, dim));
        return Ok((out, Vec::new()));
    }
    let weights = attention_weights(tape, store, &params.bank, query, kv, mask)?;

    let head_dim = dim / params.bank.heads;
    let wv = tape.param(store, &params.w_v)?;
    let bv = tape.param(store, &params.b_v)?;
    let v_all = tape.matmul(kv, wv)?;
    let v_all = tape.add_bias(v_all, bv)?;

    let mut contexts = Vec::with_capacity(params.bank.heads);
    for (h, &w) in weights.iter().enumerate() {
        let vh = tape.slice(v_all, 1, h * head_dim, (h + 1) * head_dim)?;
        contexts.push(tape.matmul(w, vh)?);
    }
    let ctx = tape.concat(&contexts, 1)?;
    let wo = tape.param(store, &params.w_o)?;
    let bo = tape.param(store, &params.b_o)?;
    let out = tape.matmul(ctx, wo)?;
    let out = tape.add_bias(out, bo)?;
    Ok((out, weights))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn setup(dim: usize, heads: usize) -> (ParamStore<f64>, MhaParams) {
        let mut rng = Rng::new(42);
        let mut store = ParamStore::new();
        let params = MhaParams::init(&mut store, "attn", dim, heads, &mut rng).unwrap();
        (store, params)
    }

    #[test]
    fn indivisible_head_split_rejected() {
        let mut rng = Rng::new(1);
        let mut store: ParamStore<f64> = ParamStore::new();
        assert!(matches!(
            MhaParams::init(&mut store, "a", 10, 4, &mut rng),
            Err(TensorError::HeadSplit { dim: 10, heads: 4 })
        ));
    }

    #[test]
    fn single_key_gets_weight_one() {
        let (store, params) = setup(8, 2);
        let mut tape = Tape::new();
        let mut rng = Rng::new(3);
        let q = tape.value(Tensor::from_vec(3, 8, (0..24).map(|_| rng.normal()).collect()));
        let kv = tape.value(Tensor::from_vec(1, 8, (0..8).map(|_| rng.normal()).collect()));
        let (_, weights) = multi_head_attention(&mut tape, &store, &params, q, kv, None).unwrap();
        assert_eq!(weights.len(), 2);
        for w in weights {
            for &v in tape.get(w).data() {
                assert_relative_eq!(v, 1.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn causal_mask_zeroes_future_positions() {
        let (store, params) = setup(8, 4);
        let mut tape = Tape::new();
        let mut rng = Rng::new(5);
        let x = tape.value(Tensor::from_vec(4, 8, (0..32).map(|_| rng.normal()).collect()));
        let mask = causal_mask::<f64>(4);
        let (_, weights) =
            multi_head_attention(&mut tape, &store, &params, x, x, Some(&mask)).unwrap();
        for w in weights {
            let wt = tape.get(w);
            for r in 0..4 {
                for c in (r + 1)..4 {
                    assert_eq!(wt.at(r, c), 0.0, "future position must get zero weight");
                }
                let row_sum: f64 = wt.row_slice(r).iter().sum();
                assert_relative_eq!(row_sum, 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn weights_rows_sum_to_one_across_shapes() {
        for (seed, dim, heads, lq, lkv) in
            [(1u64, 8, 2, 1, 5), (2, 12, 3, 4, 2), (3, 16, 4, 2, 7), (4, 8, 1, 3, 3), (5, 32, 8, 1, 1)]
        {
            let mut rng = Rng::new(seed);
            let mut store: ParamStore<f64> = ParamStore::new();
            let params = MhaParams::init(&mut store, "attn", dim, heads, &mut rng).unwrap();
            let mut tape = Tape::new();
            let q = tape.value(Tensor::from_vec(
                lq,
                dim,
                (0..lq * dim).map(|_| rng.normal()).collect(),
            ));
            let kv = tape.value(Tensor::from_vec(
                lkv,
                dim,
                (0..lkv * dim).map(|_| rng.normal()).collect(),
            ));
            let (out, weights) =
                multi_head_attention(&mut tape, &store, &params, q, kv, None).unwrap();
            assert_eq!(tape.shape_of(out), (lq, dim));
            assert_eq!(weights.len(), heads);
            for w in weights {
                let wt = tape.get(w);
                for r in 0..lq {
                    let s: f64 = wt.row_slice(r).iter().sum();
                    assert_relative_eq!(s, 1.0, epsilon = 1e-9);
                }
            }
        }
    }

    #[test]
    fn empty_kv_yields_zero_context() {
        let (store, params) = setup(8, 2);
        let mut tape = Tape::new();
        let q = tape.value(Tensor::filled(2, 8, 1.5));
        let kv = tape.value(Tensor::zeros(0, 8));
        let (out, weights) = multi_head_attention(&mut tape, &store, &params, q, kv, None).unwrap();
        assert_eq!(weights.len(), 0);
        assert!(tape.get(out).data().iter().all(|&v| v == 0.0));
    }
}
