//! Layer kinds and their forward/backward kernels.
//!
//! Accumulation order in these kernels is part of the determinism contract:
//! the interval-propagation rules in `crate::interval` walk weights in the
//! same order so that a zero-width interval reproduces `forward` bit for
//! bit. Change one, change both.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub enum Layer {
    /// Dense layer; `weight` is `[out, in]` row-major, `bias` is `[out]`.
    /// Accepts any input whose per-sample element count equals `in`.
    Affine {
        weight: Tensor,
        bias: Tensor,
    },
    /// 2-D convolution over `[N, H, W, C]` inputs with zero padding.
    /// `kernels` is `[out_c, kh, kw, in_c]`, `bias` is `[out_c]`.
    Conv2d {
        kernels: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
    },
    Relu,
}

/// Parameter gradients for one layer, mirroring `Layer`'s parameter shapes.
#[derive(Debug, Clone)]
pub enum LayerGrad {
    Affine { weight: Tensor, bias: Tensor },
    Conv2d { kernels: Tensor, bias: Tensor },
    None,
}

impl Layer {
    /// Output shape (including batch dim) for a given input shape, checking
    /// the input is usable. Conv output spatial dims must come out >= 1.
    pub fn out_shape(&self, in_shape: &[usize]) -> Result<Vec<usize>> {
        match self {
            Layer::Affine { weight, .. } => {
                let (out_f, in_f) = (weight.shape()[0], weight.shape()[1]);
                let got: usize = in_shape[1..].iter().product();
                if got != in_f {
                    return Err(Error::ShapeMismatch {
                        expected: vec![in_f],
                        actual: vec![got],
                        context: "affine input features",
                    });
                }
                Ok(vec![in_shape[0], out_f])
            }
            Layer::Conv2d {
                kernels,
                stride,
                padding,
                ..
            } => {
                if in_shape.len() != 4 {
                    return Err(Error::ShapeMismatch {
                        expected: vec![4],
                        actual: vec![in_shape.len()],
                        context: "conv input rank",
                    });
                }
                let [out_c, kh, kw, in_c] = [
                    kernels.shape()[0],
                    kernels.shape()[1],
                    kernels.shape()[2],
                    kernels.shape()[3],
                ];
                let (n, h, w, c) = (in_shape[0], in_shape[1], in_shape[2], in_shape[3]);
                if c != in_c {
                    return Err(Error::ShapeMismatch {
                        expected: vec![in_c],
                        actual: vec![c],
                        context: "conv input channels",
                    });
                }
                if h + 2 * padding < kh || w + 2 * padding < kw {
                    return Err(Error::InvalidConfig(format!(
                        "conv kernel {kh}x{kw} larger than padded input {}x{}",
                        h + 2 * padding,
                        w + 2 * padding
                    )));
                }
                let oh = (h + 2 * padding - kh) / stride + 1;
                let ow = (w + 2 * padding - kw) / stride + 1;
                Ok(vec![n, oh, ow, out_c])
            }
            Layer::Relu => Ok(in_shape.to_vec()),
        }
    }

    pub fn forward(&self, input: &Tensor) -> Result<Tensor> {
        let out_shape = self.out_shape(input.shape())?;
        match self {
            Layer::Affine { weight, bias } => {
                let in_f = weight.shape()[1];
                let n = input.num_samples();
                let mut out = Tensor::zeros(out_shape);
                for b in 0..n {
                    let x = input.sample(b);
                    let row = out.sample_mut(b);
                    for (o, r) in row.iter_mut().enumerate() {
                        let wrow = &weight.values()[o * in_f..(o + 1) * in_f];
                        let mut acc = bias.values()[o];
                        for j in 0..in_f {
                            acc += wrow[j] * x[j];
                        }
                        *r = acc;
                    }
                }
                Ok(out)
            }
            Layer::Conv2d {
                kernels,
                bias,
                stride,
                padding,
            } => {
                let [out_c, kh, kw, in_c] = [
                    kernels.shape()[0],
                    kernels.shape()[1],
                    kernels.shape()[2],
                    kernels.shape()[3],
                ];
                let (h, w) = (input.shape()[1], input.shape()[2]);
                let (oh, ow) = (out_shape[1], out_shape[2]);
                let n = input.num_samples();
                let mut out = Tensor::zeros(out_shape);
                for b in 0..n {
                    let x = input.sample(b);
                    let orow = out.sample_mut(b);
                    for y in 0..oh {
                        for xo in 0..ow {
                            for o in 0..out_c {
                                let krow = &kernels.values()[o * kh * kw * in_c..];
                                let mut acc = bias.values()[o];
                                for ky in 0..kh {
                                    let iy = (y * stride + ky) as isize - *padding as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ix = (xo * stride + kx) as isize - *padding as isize;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        let xbase = (iy as usize * w + ix as usize) * in_c;
                                        let kbase = (ky * kw + kx) * in_c;
                                        for c in 0..in_c {
                                            acc += krow[kbase + c] * x[xbase + c];
                                        }
                                    }
                                }
                                orow[(y * ow + xo) * out_c + o] = acc;
                            }
                        }
                    }
                }
                Ok(out)
            }
            Layer::Relu => {
                let mut out = input.clone();
                for v in out.values_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                Ok(out)
            }
        }
    }

    /// Gradients given this layer's forward input and the loss gradient at
    /// its output. Returns the parameter gradient and, when `want_input`,
    /// the loss gradient at the input (`None` otherwise — skipping it at
    /// the first layer is the trainer's main saving on clean steps).
    pub fn backward(
        &self,
        input: &Tensor,
        grad_out: &Tensor,
        want_input: bool,
    ) -> (LayerGrad, Option<Tensor>) {
        match self {
            Layer::Affine { weight, .. } => {
                let (out_f, in_f) = (weight.shape()[0], weight.shape()[1]);
                let n = input.num_samples();
                let mut dw = Tensor::zeros(vec![out_f, in_f]);
                let mut db = Tensor::zeros(vec![out_f]);
                for b in 0..n {
                    let x = input.sample(b);
                    let g = grad_out.sample(b);
                    for (o, &go) in g.iter().enumerate() {
                        if go == 0.0 {
                            continue;
                        }
                        db.values_mut()[o] += go;
                        let dwrow = &mut dw.values_mut()[o * in_f..(o + 1) * in_f];
                        for j in 0..in_f {
                            dwrow[j] += go * x[j];
                        }
                    }
                }
                let din = want_input.then(|| {
                    let mut din = Tensor::zeros(input.shape().to_vec());
                    for b in 0..n {
                        let g = grad_out.sample(b);
                        let drow = din.sample_mut(b);
                        for (o, &go) in g.iter().enumerate() {
                            if go == 0.0 {
                                continue;
                            }
                            let wrow = &weight.values()[o * in_f..(o + 1) * in_f];
                            for j in 0..in_f {
                                drow[j] += go * wrow[j];
                            }
                        }
                    }
                    din
                });
                (
                    LayerGrad::Affine {
                        weight: dw,
                        bias: db,
                    },
                    din,
                )
            }
            Layer::Conv2d {
                kernels,
                stride,
                padding,
                ..
            } => {
                let [out_c, kh, kw, in_c] = [
                    kernels.shape()[0],
                    kernels.shape()[1],
                    kernels.shape()[2],
                    kernels.shape()[3],
                ];
                let (h, w) = (input.shape()[1], input.shape()[2]);
                let (oh, ow) = (grad_out.shape()[1], grad_out.shape()[2]);
                let n = input.num_samples();
                let mut dk = Tensor::zeros(kernels.shape().to_vec());
                let mut db = Tensor::zeros(vec![out_c]);
                let mut din = want_input.then(|| Tensor::zeros(input.shape().to_vec()));
                for b in 0..n {
                    let x = input.sample(b);
                    let g = grad_out.sample(b);
                    for y in 0..oh {
                        for xo in 0..ow {
                            for o in 0..out_c {
                                let go = g[(y * ow + xo) * out_c + o];
                                if go == 0.0 {
                                    continue;
                                }
                                db.values_mut()[o] += go;
                                for ky in 0..kh {
                                    let iy = (y * stride + ky) as isize - *padding as isize;
                                    if iy < 0 || iy >= h as isize {
                                        continue;
                                    }
                                    for kx in 0..kw {
                                        let ix = (xo * stride + kx) as isize - *padding as isize;
                                        if ix < 0 || ix >= w as isize {
                                            continue;
                                        }
                                        let xbase = (iy as usize * w + ix as usize) * in_c;
                                        let kbase = ((o * kh + ky) * kw + kx) * in_c;
                                        for c in 0..in_c {
                                            dk.values_mut()[kbase + c] += go * x[xbase + c];
                                        }
                                        if let Some(din) = din.as_mut() {
                                            let krow = kernels.values();
                                            let drow = din.sample_mut(b);
                                            for c in 0..in_c {
                                                drow[xbase + c] += go * krow[kbase + c];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                (
                    LayerGrad::Conv2d {
                        kernels: dk,
                        bias: db,
                    },
                    din,
                )
            }
            Layer::Relu => {
                // d/dx max(0,x) taken as 0 at x == 0, matching sign(0) = 0
                // elsewhere in the crate.
                let mut din = grad_out.clone();
                for (d, &x) in din.values_mut().iter_mut().zip(input.values()) {
                    if x <= 0.0 {
                        *d = 0.0;
                    }
                }
                (LayerGrad::None, Some(din))
            }
        }
    }

    pub fn parameter_count(&self) -> usize {
        match self {
            Layer::Affine { weight, bias } => weight.len() + bias.len(),
            Layer::Conv2d { kernels, bias, .. } => kernels.len() + bias.len(),
            Layer::Relu => 0,
        }
    }
}
