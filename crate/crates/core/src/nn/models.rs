//! The two stock architectures and their seeded initialization.

use crate::error::{Error, Result};
use crate::nn::layer::Layer;
use crate::nn::network::Network;
use crate::rng::Seed;
use crate::tensor::Tensor;
use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Flatten -> 256 ReLU units -> classes. The 784-256-10 MLP for 28x28
    /// grayscale inputs.
    MlpSmall,
    /// Two 3x3 convolutions (8 then 16 channels, second at stride 2) and
    /// two affine layers (64 hidden units).
    CnnSmall,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::MlpSmall => "mlp_small",
            ModelKind::CnnSmall => "cnn_small",
        }
    }

    pub fn parse(name: &str) -> Result<ModelKind> {
        match name {
            "mlp_small" => Ok(ModelKind::MlpSmall),
            "cnn_small" => Ok(ModelKind::CnnSmall),
            _ => Err(Error::UnknownStrategy {
                kind: "model",
                name: name.to_string(),
                known: vec!["mlp_small", "cnn_small"],
            }),
        }
    }
}

/// What to build: architecture, per-sample input shape `[h, w, c]`, classes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub input: [usize; 3],
    pub num_classes: usize,
}

/// He-uniform fan-in initialization; biases start at zero. Each layer draws
/// from its own lane so layer k's weights do not depend on layer sizes
/// elsewhere in the stack.
fn init_tensor(shape: Vec<usize>, fan_in: usize, seed: Seed, layer_idx: u64) -> Tensor {
    let mut rng = seed.lane("init", &[layer_idx]);
    let bound = (6.0 / fan_in as f64).sqrt();
    let n: usize = shape.iter().product();
    let values = (0..n)
        .map(|_| (2.0 * rng.gen::<f64>() - 1.0) * bound)
        .collect();
    Tensor::new(shape, values).expect("init draws are finite")
}

pub fn build_model(spec: &ModelSpec, seed: Seed) -> Result<Network> {
    let [h, w, c] = spec.input;
    let classes = spec.num_classes;
    match spec.kind {
        ModelKind::MlpSmall => {
            let in_f = h * w * c;
            let hidden = 256;
            let layers = vec![
                Layer::Affine {
                    weight: init_tensor(vec![hidden, in_f], in_f, seed, 0),
                    bias: Tensor::zeros(vec![hidden]),
                },
                Layer::Relu,
                Layer::Affine {
                    weight: init_tensor(vec![classes, hidden], hidden, seed, 1),
                    bias: Tensor::zeros(vec![classes]),
                },
            ];
            Network::new(layers, vec![h, w, c], classes)
        }
        ModelKind::CnnSmall => {
            let (c1, c2, hidden) = (8, 16, 64);
            let oh = (h + 2 - 3) / 2 + 1;
            let ow = (w + 2 - 3) / 2 + 1;
            let flat = oh * ow * c2;
            let layers = vec![
                Layer::Conv2d {
                    kernels: init_tensor(vec![c1, 3, 3, c], 9 * c, seed, 0),
                    bias: Tensor::zeros(vec![c1]),
                    stride: 1,
                    padding: 1,
                },
                Layer::Relu,
                Layer::Conv2d {
                    kernels: init_tensor(vec![c2, 3, 3, c1], 9 * c1, seed, 1),
                    bias: Tensor::zeros(vec![c2]),
                    stride: 2,
                    padding: 1,
                },
                Layer::Relu,
                Layer::Affine {
                    weight: init_tensor(vec![hidden, flat], flat, seed, 2),
                    bias: Tensor::zeros(vec![hidden]),
                },
                Layer::Relu,
                Layer::Affine {
                    weight: init_tensor(vec![classes, hidden], hidden, seed, 3),
                    bias: Tensor::zeros(vec![classes]),
                },
            ];
            Network::new(layers, vec![h, w, c], classes)
        }
    }
}
