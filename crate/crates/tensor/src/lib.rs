//! Minimal dense-tensor and reverse-mode autodiff core: the math stack
//! behind the expansion model. Generic over the floating scalar; the
//! pipeline runs on the f64 aliases below.

pub mod attention;
pub mod checkpoint;
pub mod error;
pub mod gradcheck;
pub mod ops;
pub mod optim;
pub mod params;
pub mod scalar;
pub mod tape;
pub mod tensor;

pub use attention::{
    attention_weights, causal_mask, multi_head_attention, AttentionBankParams, MhaParams,
};
pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointError};
pub use error::TensorError;
pub use gradcheck::grad_check;
pub use optim::{adam_step, AdamState, LrSchedule, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use params::{Gradients, ParamStore};
pub use scalar::Scalar;
pub use tape::{Tape, Var};
pub use tensor::Tensor;

pub type Tensor64 = Tensor<f64>;
pub type Tape64 = Tape<f64>;
pub type ParamStore64 = ParamStore<f64>;
pub type Gradients64 = Gradients<f64>;
pub type AdamState64 = AdamState<f64>;
