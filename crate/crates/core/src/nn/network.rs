//! Network container: a layer stack with shape checking, forward pass, and
//! reverse-mode gradients.

use crate::error::{Error, Result};
use crate::nn::layer::{Layer, LayerGrad};
use crate::nn::loss::cross_entropy_grad;
use crate::tensor::Tensor;

/// Gradients from one backward pass: one entry per layer (parameter-free
/// layers get `LayerGrad::None`) plus the loss gradient at the input batch,
/// which is what gradient-sign attacks consume.
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub param_grads: Vec<LayerGrad>,
    pub input_grad: Tensor,
}

#[derive(Debug, Clone)]
pub struct Network {
    layers: Vec<Layer>,
    /// Per-sample input shape, e.g. `[28, 28, 1]`.
    input_shape: Vec<usize>,
    num_classes: usize,
}

impl Network {
    /// Build and validate: shapes are inferred through the whole stack once
    /// (catching e.g. kernels larger than their padded input), and the final
    /// width must equal `num_classes`.
    pub fn new(layers: Vec<Layer>, input_shape: Vec<usize>, num_classes: usize) -> Result<Network> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig(
                "network needs at least one layer".into(),
            ));
        }
        if num_classes < 2 {
            return Err(Error::InvalidConfig(format!(
                "num_classes must be >= 2, got {num_classes}"
            )));
        }
        let mut shape: Vec<usize> = std::iter::once(1)
            .chain(input_shape.iter().copied())
            .collect();
        for layer in &layers {
            shape = layer.out_shape(&shape)?;
        }
        if shape != [1, num_classes] {
            return Err(Error::ShapeMismatch {
                expected: vec![1, num_classes],
                actual: shape,
                context: "network output vs num_classes",
            });
        }
        Ok(Network {
            layers,
            input_shape,
            num_classes,
        })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(Layer::parameter_count).sum()
    }

    /// Every parameter tensor in layer order (affine: weight then bias;
    /// conv: kernels then bias). Parameter-free layers contribute nothing.
    pub fn parameters(&self) -> Vec<&Tensor> {
        let mut out = Vec::new();
        for layer in &self.layers {
            match layer {
                Layer::Affine { weight, bias } => {
                    out.push(weight);
                    out.push(bias);
                }
                Layer::Conv2d { kernels, bias, .. } => {
                    out.push(kernels);
                    out.push(bias);
                }
                Layer::Relu => {}
            }
        }
        out
    }

    /// Overwrite every parameter tensor, in the same order [`parameters`]
    /// reports them. Shapes must match the existing parameters exactly.
    pub(crate) fn set_parameters(&mut self, tensors: &[Tensor]) -> Result<()> {
        let mut slots = Vec::new();
        for layer in &mut self.layers {
            match layer {
                Layer::Affine { weight, bias } => {
                    slots.push(weight);
                    slots.push(bias);
                }
                Layer::Conv2d { kernels, bias, .. } => {
                    slots.push(kernels);
                    slots.push(bias);
                }
                Layer::Relu => {}
            }
        }
        if slots.len() != tensors.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![slots.len()],
                actual: vec![tensors.len()],
                context: "parameter tensor count",
            });
        }
        for (slot, t) in slots.into_iter().zip(tensors) {
            if !slot.same_shape(t) {
                return Err(Error::ShapeMismatch {
                    expected: slot.shape().to_vec(),
                    actual: t.shape().to_vec(),
                    context: "parameter tensor shape",
                });
            }
            *slot = t.clone();
        }
        Ok(())
    }

    fn check_batch(&self, batch: &Tensor) -> Result<()> {
        if batch.shape().len() != self.input_shape.len() + 1
            || batch.shape()[1..] != self.input_shape[..]
            || batch.num_samples() == 0
        {
            return Err(Error::ShapeMismatch {
                expected: self.input_shape.clone(),
                actual: batch.shape().to_vec(),
                context: "network input batch",
            });
        }
        Ok(())
    }

    /// Logits `[N, num_classes]`. Pure: same input, same bits.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.check_batch(batch)?;
        let mut cur = self.layers[0].forward(batch)?;
        for layer in &self.layers[1..] {
            cur = layer.forward(&cur)?;
        }
        Ok(cur)
    }

    /// Forward keeping every intermediate activation (input first, logits
    /// last); the backward pass replays these.
    fn forward_trace(&self, batch: &Tensor) -> Result<Vec<Tensor>> {
        self.check_batch(batch)?;
        let mut acts = Vec::with_capacity(self.layers.len() + 1);
        acts.push(batch.clone());
        for layer in &self.layers {
            let next = layer.forward(acts.last().unwrap())?;
            acts.push(next);
        }
        Ok(acts)
    }

    /// Mean cross-entropy loss and its gradients with respect to every
    /// parameter and the input batch.
    pub fn backward(&self, batch: &Tensor, labels: &[usize]) -> Result<(f64, GradientSet)> {
        let (loss, grads, input_grad) = self.backward_impl(batch, labels, true)?;
        Ok((
            loss,
            GradientSet {
                param_grads: grads,
                input_grad: input_grad.unwrap(),
            },
        ))
    }

    /// Loss and parameter gradients only. Skips the input-gradient work at
    /// the first layer, which is the bulk of the saving on clean training
    /// steps; attacks use `backward` instead.
    pub fn loss_and_param_grads(
        &self,
        batch: &Tensor,
        labels: &[usize],
    ) -> Result<(f64, Vec<LayerGrad>)> {
        let (loss, grads, _) = self.backward_impl(batch, labels, false)?;
        Ok((loss, grads))
    }

    fn backward_impl(
        &self,
        batch: &Tensor,
        labels: &[usize],
        want_input: bool,
    ) -> Result<(f64, Vec<LayerGrad>, Option<Tensor>)> {
        let acts = self.forward_trace(batch)?;
        let (loss, mut grad) = cross_entropy_grad(acts.last().unwrap(), labels)?;
        let mut param_grads = vec![LayerGrad::None; self.layers.len()];
        let mut input_grad = None;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let need_below = i > 0 || want_input;
            let (pg, din) = layer.backward(&acts[i], &grad, need_below);
            param_grads[i] = pg;
            match din {
                Some(d) if i == 0 => input_grad = Some(d),
                Some(d) => grad = d,
                None => break,
            }
        }
        Ok((loss, param_grads, input_grad))
    }
}
