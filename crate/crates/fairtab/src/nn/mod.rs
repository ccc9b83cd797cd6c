//! Minimal differentiable-computation kernel: dense layers, embedding
//! tables, activations, losses, reverse-mode gradients, Adam/AdamW, and a
//! finite-difference gradient checker.
//!
//! There is no tape. Each component computes its own forward pass with a
//! cache and a matching backward pass that accumulates into per-parameter
//! gradient buffers; composite models wire the chain rule by hand.

mod embedding;
mod gradcheck;
mod loss;
mod mlp;
mod optim;
mod tensor;

pub use embedding::EmbeddingTable;
pub use gradcheck::{grad_check, max_rel_err};
pub use loss::{cross_entropy, cross_entropy_grad, mse, mse_grad, sigmoid, PROB_CLIP};
pub use mlp::{Activation, Mlp, MlpCache, MlpSpec};
pub use optim::{OptConfig, Optimizer};
pub use tensor::{assert_all_finite, Tensor};
