//! The incremental expansion network and its runtime: query/graph
//! encoders, feature fusion, edge and node decoders with the copy
//! mixture, teacher-forced training, greedy decoding, metrics, and the
//! analysis reports. Generic over the float scalar; the pipeline runs on
//! the f64 alias.

pub mod ckpt;
pub mod config;
pub mod decode;
pub mod error;
pub mod layers;
pub mod loss;
pub mod metrics;
pub mod net;
pub mod parallel;
pub mod report;
pub mod train;
pub mod vocab;

pub use ckpt::{load_model, save_model};
pub use config::ModelConfig;
pub use decode::{decode, decode_all, subsample_fraction, DEFAULT_MAX_STEPS, EDGE_THRESHOLD};
pub use error::ModelError;
pub use loss::{example_loss, example_step_losses, example_step_losses_sequential, step_loss, PROB_FLOOR};
pub use metrics::{copy_graph_baseline, edge_f1, graph_accuracy, node_f1, ExampleRecord, MetricsReport};
pub use net::{EdgePrediction, GraphEncoding, Model, NodeDistribution, QueryEncoding};
pub use report::{bucket_machine_lines, bucket_tables, bucketize, sweep_table, BucketRow, BUCKET_LABELS};
pub use train::{train, TrainConfig, TrainReport};
pub use vocab::{Vocab, SENT_TOKEN};

pub type Model64 = Model<f64>;
