//! Subset-filtered adversarial training.
//!
//! The expensive part of adversarial training is running a gradient attack
//! on every training sample. This crate trains robust image classifiers by
//! spending that budget only where it pays: cheap gradient-free screening
//! attacks rank how unstable each sample's prediction is, the unstable
//! subset is re-filtered every few epochs, and gradient-attack batches are
//! drawn from that subset while the rest of training stays vanilla.
//!
//! The pieces are usable on their own:
//!
//! - [`nn`]: a small deterministic f64 network stack (affine/conv/relu,
//!   cross-entropy, SGD with momentum) with exact, order-pinned arithmetic
//! - [`attack`]: the gradient sign attack and the screening attack family
//! - [`filter`]: prediction ranges under screening and prone-subset selection
//! - [`train`]: the training modes (vanilla, full adversarial, subset-mixed,
//!   batch-replay) behind one registry, plus evaluation and the ratio sweep
//! - [`interval`]: interval bound propagation through the same layers, bit
//!   compatible with the forward pass on degenerate intervals
//!
//! Everything is seeded explicitly and runs single threaded; two runs with
//! the same seed produce byte-identical metrics and checkpoints.

pub mod attack;
pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod filter;
pub mod interval;
pub mod nn;
pub mod report;
pub mod rng;
pub mod runner;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};
pub use tensor::Tensor;
