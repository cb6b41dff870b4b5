//! Reverse-mode automatic differentiation over a linear tape.
//!
//! Ops append nodes holding the forward value plus a one-shot backward
//! closure; [`Tape::backward`] walks the tape in reverse, accumulating
//! gradients additively into every reachable node and collecting the
//! gradients of parameter leaves by name. A tape is confined to one
//! thread; independent tapes (one per example) run in parallel and their
//! gradient maps are merged afterwards.

use graft_core::Rng;

use crate::error::TensorError;
use crate::params::{Gradients, ParamStore};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Handle to a value on the tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(pub(crate) usize);

pub(crate) type BackFn<S> = Box<dyn FnOnce(&Tensor<S>) -> Vec<(usize, Tensor<S>)>>;

pub(crate) struct TapeNode<S> {
    pub(crate) value: Tensor<S>,
    pub(crate) back: Option<BackFn<S>>,
    pub(crate) param: Option<String>,
}

pub struct Tape<S: Scalar> {
    pub(crate) nodes: Vec<TapeNode<S>>,
    grad_enabled: bool,
    rng: Option<Rng>,
}

impl<S: Scalar> Tape<S> {
    /// A gradient-recording tape.
    pub fn new() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: true,
            rng: None,
        }
    }

    /// A forward-only tape: no backward closures are recorded.
    pub fn no_grad() -> Self {
        Self {
            nodes: Vec::new(),
            grad_enabled: false,
            rng: None,
        }
    }

    /// Attaches the RNG stream that dropout draws from.
    pub fn with_rng(mut self, rng: Rng) -> Self {
        self.rng = Some(rng);
        self
    }

    pub fn grad_enabled(&self) -> bool {
        self.grad_enabled
    }

    pub(crate) fn rng_mut(&mut self) -> Result<&mut Rng, TensorError> {
        self.rng.as_mut().ok_or(TensorError::NoRng)
    }

    pub(crate) fn push(&mut self, value: Tensor<S>, back: Option<BackFn<S>>) -> Var {
        let back = if self.grad_enabled { back } else { None };
        self.nodes.push(TapeNode {
            value,
            back,
            param: None,
        });
        Var(self.nodes.len() - 1)
    }

    /// Puts a plain value on the tape (an input or a constant).
    pub fn value(&mut self, t: Tensor<S>) -> Var {
        self.push(t, None)
    }

    /// Leases a named parameter onto the tape; its gradient will surface in
    /// the map returned by [`Tape::backward`].
    pub fn param(&mut self, store: &ParamStore<S>, name: &str) -> Result<Var, TensorError> {
        let value = store.get(name)?.clone();
        let var = self.push(value, None);
        if self.grad_enabled {
            self.nodes[var.0].param = Some(name.to_string());
        }
        Ok(var)
    }

    pub fn get(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape_of(&self, v: Var) -> (usize, usize) {
        let t = self.get(v);
        (t.rows(), t.cols())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Reverse pass from a scalar loss. Gradients accumulate additively
    /// when a value feeds several consumers; parameters used twice sum
    /// their contributions. Consumes the tape's backward closures.
    pub fn backward(&mut self, loss: Var) -> Result<Gradients<S>, TensorError> {
        if !self.grad_enabled {
            return Err(TensorError::Invalid(
                "backward on a no-grad tape".to_string(),
            ));
        }
        let loss_value = self.get(loss);
        if loss_value.len() != 1 {
            return Err(TensorError::NotScalar(loss_value.shape_string()));
        }

        let mut grads: Vec<Option<Tensor<S>>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(S::one()));

        let mut out = Gradients::new();
        for i in (0..=loss.0).rev() {
            let Some(grad) = grads[i].take() else { continue };
            let node = &mut self.nodes[i];
            if let Some(name) = &node.param {
                out.insert_or_add(name, grad.clone());
            }
            if let Some(back) = node.back.take() {
                for (parent, contribution) in back(&grad) {
                    match &mut grads[parent] {
                        Some(existing) => existing.add_assign(&contribution),
                        slot @ None => *slot = Some(contribution),
                    }
                }
            }
        }
        Ok(out)
    }
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}
