//! Model-level checkpointing: the tensor payload plus a JSON config echo
//! carrying the architecture and both vocabularies, so a checkpoint is
//! self-contained for decoding and evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use graft_tensor::{load_checkpoint, save_checkpoint, Scalar};

use crate::config::ModelConfig;
use crate::error::ModelError;
use crate::net::Model;
use crate::vocab::Vocab;

#[derive(Debug, Serialize, Deserialize)]
struct ConfigEcho {
    config: ModelConfig,
    tokens: Vec<String>,
    gen_tokens: Vec<String>,
}

pub fn save_model<S: Scalar>(model: &Model<S>, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let echo = ConfigEcho {
        config: model.config.clone(),
        tokens: model.vocab.tokens().to_vec(),
        gen_tokens: model.vocab.gen_tokens().to_vec(),
    };
    let json = serde_json::to_string(&echo)
        .map_err(|e| ModelError::Invalid(format!("config echo: {e}")))?;
    save_checkpoint(&model.store, &json, path)?;
    Ok(())
}

pub fn load_model<S: Scalar>(path: impl AsRef<Path>) -> Result<Model<S>, ModelError> {
    let (store, json) = load_checkpoint::<S>(path)?;
    let echo: ConfigEcho = serde_json::from_str(&json)
        .map_err(|e| ModelError::ConfigMismatch(format!("config echo does not parse: {e}")))?;
    let vocab = Vocab::from_lists(echo.tokens, echo.gen_tokens);
    Model::from_store(echo.config, vocab, store)
}
