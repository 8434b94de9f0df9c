//! The graph network: convolutions, per-layer branches, readout and head.

mod batch;
mod checkpoint;
pub mod conv;
mod model;

pub use batch::{GraphBatch, GraphSample, LayerBatch};
pub use checkpoint::{checkpoint_from_json, checkpoint_to_json, load_checkpoint, save_checkpoint};
pub use conv::{gatv2_forward, gcn_forward, graphconv_forward, Adjacency};
pub use model::{argmax_rows, cross_entropy, model_grad_check, ConvKind, ModelConfig, ModelParams, Pooling, Readout};
