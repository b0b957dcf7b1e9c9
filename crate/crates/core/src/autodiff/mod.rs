//! Dense tensors, a reverse-mode tape for the conditioned MLP, and Adam.

pub mod adam;
pub mod mlp;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use mlp::{check_layers, eval_mlp, forward_mlp, record_layers, Layer, LayerVars};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor2;
