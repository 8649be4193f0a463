//! Small feed-forward networks with exact, replayable gradients.
//!
//! Three layer kinds (affine, 2-D convolution, ReLU), softmax kept inside
//! the loss (never a layer), reverse-mode gradients for both parameters and
//! the input batch, and plain SGD with momentum. Everything is f64 and
//! single-threaded; two runs from the same seed produce bit-identical
//! parameters.

mod layer;
mod loss;
mod models;
mod network;
mod sgd;

pub use layer::{Layer, LayerGrad};
pub use loss::{cross_entropy, cross_entropy_grad, softmax_probs};
pub use models::{build_model, ModelKind, ModelSpec};
pub use network::{GradientSet, Network};
pub use sgd::{sgd_step, SgdConfig, Velocity};
