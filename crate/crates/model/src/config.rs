//! Model hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// Architecture dimensions. Defaults are the full-scale settings; tests
/// and desk-scale runs shrink them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub word_emb_dim: usize,
    pub concept_emb_dim: usize,
    pub hidden_dim: usize,
    pub ffn_dim: usize,
    pub heads: usize,
    pub query_layers: usize,
    pub graph_layers: usize,
    pub fusion_layers: usize,
    pub dropout: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            word_emb_dim: 300,
            concept_emb_dim: 300,
            hidden_dim: 512,
            ffn_dim: 1024,
            heads: 8,
            query_layers: 4,
            graph_layers: 2,
            fusion_layers: 2,
            dropout: 0.2,
        }
    }
}

impl ModelConfig {
    /// A small configuration for quick experiments and tests.
    pub fn tiny(hidden_dim: usize, heads: usize) -> Self {
        Self {
            word_emb_dim: hidden_dim,
            concept_emb_dim: hidden_dim,
            hidden_dim,
            ffn_dim: hidden_dim * 2,
            heads,
            query_layers: 2,
            graph_layers: 2,
            fusion_layers: 2,
            dropout: 0.1,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_dim == 0 || self.heads == 0 || self.hidden_dim % self.heads != 0 {
            return Err(ModelError::BadConfig(format!(
                "hidden_dim {} must be divisible by heads {}",
                self.hidden_dim, self.heads
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::BadConfig(format!(
                "dropout {} out of range",
                self.dropout
            )));
        }
        if self.query_layers == 0 || self.graph_layers == 0 || self.fusion_layers == 0 {
            return Err(ModelError::BadConfig("layer counts must be positive".into()));
        }
        Ok(())
    }
}
