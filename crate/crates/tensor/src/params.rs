//! Named model parameters with gradient slots.

use std::collections::BTreeMap;

use graft_core::Rng;

use crate::error::TensorError;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Gradients keyed by parameter name, as produced by one backward pass.
#[derive(Debug, Clone, Default)]
pub struct Gradients<S> {
    map: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn new() -> Self {
        Self {
            map: BTreeMap::new(),
        }
    }

    pub fn insert_or_add(&mut self, name: &str, grad: Tensor<S>) {
        match self.map.get_mut(name) {
            Some(existing) => existing.add_assign(&grad),
            None => {
                self.map.insert(name.to_string(), grad);
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&Tensor<S>> {
        self.map.get(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.map.iter()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Element-wise merge of another gradient map into this one.
    pub fn merge(&mut self, other: Gradients<S>) {
        for (name, grad) in other.map {
            self.insert_or_add(&name, grad);
        }
    }
}

/// Name -> tensor map with deterministic (sorted) iteration order, plus a
/// gradient buffer per parameter filled by backward passes.
#[derive(Debug, Clone)]
pub struct ParamStore<S> {
    params: BTreeMap<String, Tensor<S>>,
    grads: BTreeMap<String, Tensor<S>>,
}

impl<S: Scalar> Default for ParamStore<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        Self {
            params: BTreeMap::new(),
            grads: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor<S>) {
        assert!(
            !name.contains(char::is_whitespace),
            "parameter names must not contain whitespace: {name:?}"
        );
        let prev = self.params.insert(name.to_string(), tensor);
        assert!(prev.is_none(), "duplicate parameter {name:?}");
    }

    /// Weight matrix initialized uniformly in `±sqrt(6 / (fan_in + fan_out))`.
    pub fn add_matrix(&mut self, name: &str, rows: usize, cols: usize, rng: &mut Rng) {
        let bound = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::lit(rng.uniform_symmetric(bound)))
            .collect();
        self.insert(name, Tensor::from_vec(rows, cols, data));
    }

    /// Bias row initialized to zero.
    pub fn add_zeros(&mut self, name: &str, rows: usize, cols: usize) {
        self.insert(name, Tensor::zeros(rows, cols));
    }

    /// Layer-norm gain row initialized to one.
    pub fn add_ones(&mut self, name: &str, cols: usize) {
        self.insert(name, Tensor::filled(1, cols, S::one()));
    }

    /// Embedding table initialized `N(0, 1/sqrt(dim))`.
    pub fn add_embedding(&mut self, name: &str, vocab: usize, dim: usize, rng: &mut Rng) {
        let std = 1.0 / (dim as f64).sqrt();
        let data = (0..vocab * dim)
            .map(|_| S::lit(rng.normal() * std))
            .collect();
        self.insert(name, Tensor::from_vec(vocab, dim, data));
    }

    pub fn get(&self, name: &str) -> Result<&Tensor<S>, TensorError> {
        self.params
            .get(name)
            .ok_or_else(|| TensorError::MissingParam(name.to_string()))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor<S>, TensorError> {
        self.params
            .get_mut(name)
            .ok_or_else(|| TensorError::MissingParam(name.to_string()))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn element_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }

    /// Parameters in sorted-name order.
    pub fn iter(&self) -> impl Iterator<Item = (&String, &Tensor<S>)> {
        self.params.iter()
    }

    pub fn names(&self) -> impl Iterator<Item = &String> {
        self.params.keys()
    }

    /// Adds a backward pass's gradients into the store's buffers.
    pub fn accumulate(&mut self, grads: &Gradients<S>) {
        for (name, grad) in grads.iter() {
            debug_assert!(self.params.contains_key(name), "gradient for unknown {name:?}");
            match self.grads.get_mut(name) {
                Some(existing) => existing.add_assign(grad),
                None => {
                    self.grads.insert(name.clone(), grad.clone());
                }
            }
        }
    }

    pub fn grad(&self, name: &str) -> Option<&Tensor<S>> {
        self.grads.get(name)
    }

    pub fn scale_grads(&mut self, factor: S) {
        for g in self.grads.values_mut() {
            *g = g.map(|x| x * factor);
        }
    }

    pub fn zero_grads(&mut self) {
        self.grads.clear();
    }
}
