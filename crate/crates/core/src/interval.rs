//! Interval bound propagation: push an axis-aligned box of inputs through a
//! network and get sound elementwise bounds on every logit.
//!
//! The affine and convolution rules split each weight by sign, so the lower
//! bound collects `w+ * lower + w- * upper` and the upper bound the reverse.
//! Accumulation happens per output coordinate in exactly the loop order of
//! the corresponding forward kernels in [`crate::nn`]; on a zero-width box
//! one of the two split terms is a signed zero, each step adds the very
//! product the forward pass adds, and the bounds land on the forward values
//! exactly rather than within a tolerance. That equality is load-bearing:
//! tests pin it, and the demo below leans on bounds being trustworthy.
//!
//! The demo network at the bottom is the reason this module exists: a
//! two-input network where evaluating the box endpoints says "nothing
//! happens" while the true output range inside the box is nearly the whole
//! simplex. Screening by perturbation, not by endpoint evaluation, is built
//! on that observation.

use crate::error::{Error, Result};
use crate::nn::{softmax_probs, Layer, Network};
use crate::tensor::Tensor;
use serde::Serialize;

/// An axis-aligned box of tensors: elementwise `lower <= upper`, same shape.
#[derive(Debug, Clone)]
pub struct IntervalTensor {
    lower: Tensor,
    upper: Tensor,
}

impl IntervalTensor {
    pub fn new(lower: Tensor, upper: Tensor) -> Result<IntervalTensor> {
        if !lower.same_shape(&upper) {
            return Err(Error::ShapeMismatch {
                expected: lower.shape().to_vec(),
                actual: upper.shape().to_vec(),
                context: "interval bounds",
            });
        }
        if lower
            .values()
            .iter()
            .zip(upper.values())
            .any(|(l, u)| l > u)
        {
            return Err(Error::InvalidConfig(
                "interval lower bound exceeds upper bound".into(),
            ));
        }
        Ok(IntervalTensor { lower, upper })
    }

    /// The zero-width box containing exactly one point.
    pub fn point(x: &Tensor) -> IntervalTensor {
        IntervalTensor {
            lower: x.clone(),
            upper: x.clone(),
        }
    }

    pub fn lower(&self) -> &Tensor {
        &self.lower
    }

    pub fn upper(&self) -> &Tensor {
        &self.upper
    }

    pub fn contains(&self, x: &Tensor) -> bool {
        x.same_shape(&self.lower)
            && self
                .lower
                .values()
                .iter()
                .zip(self.upper.values())
                .zip(x.values())
                .all(|((l, u), v)| l <= v && v <= u)
    }

    /// Elementwise subset test: every coordinate range of `self` sits inside
    /// the corresponding range of `other`.
    pub fn subset_of(&self, other: &IntervalTensor) -> bool {
        self.lower.same_shape(&other.lower)
            && self
                .lower
                .values()
                .iter()
                .zip(other.lower.values())
                .all(|(a, b)| b <= a)
            && self
                .upper
                .values()
                .iter()
                .zip(other.upper.values())
                .all(|(a, b)| a <= b)
    }
}

/// Affine rule: with `w+ = max(w, 0)` and `w- = min(w, 0)`,
/// `lower' = w+ . lower + w- . upper + b` and symmetrically for the upper
/// bound. Sound because each term picks the worst feasible endpoint.
pub fn propagate_affine(
    weight: &Tensor,
    bias: &Tensor,
    iv: &IntervalTensor,
) -> Result<IntervalTensor> {
    let (out_f, in_f) = (weight.shape()[0], weight.shape()[1]);
    if iv.lower.sample_len() != in_f {
        return Err(Error::ShapeMismatch {
            expected: vec![in_f],
            actual: iv.lower.shape()[1..].to_vec(),
            context: "affine interval input",
        });
    }
    let n = iv.lower.num_samples();
    let mut out_lo = Tensor::zeros(vec![n, out_f]);
    let mut out_hi = Tensor::zeros(vec![n, out_f]);
    for b in 0..n {
        let lo = iv.lower.sample(b);
        let hi = iv.upper.sample(b);
        for o in 0..out_f {
            let wrow = &weight.values()[o * in_f..(o + 1) * in_f];
            let mut alo = bias.values()[o];
            let mut ahi = bias.values()[o];
            // same j-order and accumulator pattern as the forward kernel;
            // when lo[j] == hi[j] one split term is a signed zero and each
            // step adds exactly the forward product
            for j in 0..in_f {
                let w = wrow[j];
                let wp = if w > 0.0 { w } else { 0.0 };
                let wn = if w < 0.0 { w } else { 0.0 };
                alo += wp * lo[j] + wn * hi[j];
                ahi += wp * hi[j] + wn * lo[j];
            }
            out_lo.sample_mut(b)[o] = alo;
            out_hi.sample_mut(b)[o] = ahi;
        }
    }
    Ok(IntervalTensor {
        lower: out_lo,
        upper: out_hi,
    })
}

/// ReLU rule: clamp both bounds at zero (monotone, exact).
pub fn propagate_relu(iv: &IntervalTensor) -> IntervalTensor {
    let mut lower = iv.lower.clone();
    let mut upper = iv.upper.clone();
    // written as the forward kernel writes it, not as max(), so zero-width
    // boxes keep bit-identical values through negative zeros
    for v in lower.values_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    for v in upper.values_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    IntervalTensor { lower, upper }
}

/// Convolution rule: the affine sign-split applied inside the convolution
/// loops, mirroring the forward kernel's traversal of the receptive field.
fn propagate_conv(
    kernels: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
    iv: &IntervalTensor,
    out_shape: Vec<usize>,
) -> IntervalTensor {
    let [out_c, kh, kw, in_c] = [
        kernels.shape()[0],
        kernels.shape()[1],
        kernels.shape()[2],
        kernels.shape()[3],
    ];
    let (h, w) = (iv.lower.shape()[1], iv.lower.shape()[2]);
    let (oh, ow) = (out_shape[1], out_shape[2]);
    let n = iv.lower.num_samples();
    let mut out_lo = Tensor::zeros(out_shape.clone());
    let mut out_hi = Tensor::zeros(out_shape);
    for b in 0..n {
        let lo = iv.lower.sample(b);
        let hi = iv.upper.sample(b);
        for y in 0..oh {
            for xo in 0..ow {
                for o in 0..out_c {
                    let krow = &kernels.values()[o * kh * kw * in_c..];
                    let mut alo = bias.values()[o];
                    let mut ahi = bias.values()[o];
                    for ky in 0..kh {
                        let iy = (y * stride + ky) as isize - padding as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..kw {
                            let ix = (xo * stride + kx) as isize - padding as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let xbase = (iy as usize * w + ix as usize) * in_c;
                            let kbase = (ky * kw + kx) * in_c;
                            for c in 0..in_c {
                                let k = krow[kbase + c];
                                let kp = if k > 0.0 { k } else { 0.0 };
                                let kn = if k < 0.0 { k } else { 0.0 };
                                alo += kp * lo[xbase + c] + kn * hi[xbase + c];
                                ahi += kp * hi[xbase + c] + kn * lo[xbase + c];
                            }
                        }
                    }
                    let at = (y * ow + xo) * out_c + o;
                    out_lo.sample_mut(b)[at] = alo;
                    out_hi.sample_mut(b)[at] = ahi;
                }
            }
        }
    }
    IntervalTensor {
        lower: out_lo,
        upper: out_hi,
    }
}

/// Bounds on every logit over the whole input box: composes the per-layer
/// rules in network order. Sound: `forward(x)` lies inside the result for
/// every `x` in the box.
pub fn propagate_network(net: &Network, iv: &IntervalTensor) -> Result<IntervalTensor> {
    let expect: Vec<usize> = std::iter::once(iv.lower.num_samples())
        .chain(net.input_shape().iter().copied())
        .collect();
    if iv.lower.shape() != &expect[..] || iv.lower.num_samples() == 0 {
        return Err(Error::ShapeMismatch {
            expected: expect,
            actual: iv.lower.shape().to_vec(),
            context: "interval network input",
        });
    }
    let mut cur = iv.clone();
    for layer in net.layers() {
        cur = match layer {
            Layer::Affine { weight, bias } => propagate_affine(weight, bias, &cur)?,
            Layer::Relu => propagate_relu(&cur),
            Layer::Conv2d {
                kernels,
                bias,
                stride,
                padding,
            } => {
                let out_shape = layer.out_shape(cur.lower().shape())?;
                propagate_conv(kernels, bias, *stride, *padding, &cur, out_shape)
            }
        };
    }
    Ok(cur)
}

/// The two-input reference network used by the endpoint demo and many tests:
/// `h = relu([x1 - x2, x2 - x1])`, `logits = [2*h1 + h2, h2]`. Hand-built so
/// every value below is checkable in closed form.
pub fn demo_network() -> Network {
    Network::new(
        vec![
            Layer::Affine {
                weight: Tensor::new(vec![2, 2], vec![1.0, -1.0, -1.0, 1.0]).unwrap(),
                bias: Tensor::zeros(vec![2]),
            },
            Layer::Relu,
            Layer::Affine {
                weight: Tensor::new(vec![2, 2], vec![2.0, 1.0, 0.0, 1.0]).unwrap(),
                bias: Tensor::zeros(vec![2]),
            },
        ],
        vec![2],
        2,
    )
    .expect("demo network is well formed")
}

/// One input evaluated through the demo network.
#[derive(Debug, Clone, Serialize)]
pub struct DemoEvaluation {
    pub input: [f64; 2],
    pub probs: [f64; 2],
}

/// Elementwise logit bounds over the demo input box.
#[derive(Debug, Clone, Serialize)]
pub struct DemoBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// What the endpoint demo reports: evaluating the center and both box
/// endpoints of the input box `[0,4] x [1,5]` gives the same uninformative
/// (0.5, 0.5) answer, while an interior point is classified with near
/// certainty. Point probes at box endpoints say nothing about the output
/// range; the propagated bounds do contain it.
#[derive(Debug, Clone, Serialize)]
pub struct DemoReport {
    pub point_outputs: DemoEvaluation,
    pub corner_outputs: Vec<DemoEvaluation>,
    pub interior_output: DemoEvaluation,
    pub ibp_bounds: DemoBounds,
    pub interior_exceeds_corners: bool,
}

fn eval_demo(net: &Network, input: [f64; 2]) -> DemoEvaluation {
    let x = Tensor::new(vec![1, 2], input.to_vec()).expect("finite demo input");
    let probs = softmax_probs(&net.forward(&x).expect("demo input fits"));
    DemoEvaluation {
        input,
        probs: [probs.values()[0], probs.values()[1]],
    }
}

/// Run the endpoint demo on the reference network.
pub fn demo_report() -> DemoReport {
    let net = demo_network();
    let point_outputs = eval_demo(&net, [2.0, 3.0]);
    let corner_outputs = vec![eval_demo(&net, [0.0, 1.0]), eval_demo(&net, [4.0, 5.0])];
    let interior_output = eval_demo(&net, [4.0, 1.0]);

    let iv = IntervalTensor::new(
        Tensor::new(vec![1, 2], vec![0.0, 1.0]).unwrap(),
        Tensor::new(vec![1, 2], vec![4.0, 5.0]).unwrap(),
    )
    .unwrap();
    let bounds = propagate_network(&net, &iv).expect("demo box fits the demo network");

    let best_corner = corner_outputs
        .iter()
        .map(|e| e.probs[0])
        .fold(f64::MIN, f64::max);
    DemoReport {
        interior_exceeds_corners: interior_output.probs[0] > best_corner,
        point_outputs,
        corner_outputs,
        interior_output,
        ibp_bounds: DemoBounds {
            lower: bounds.lower().values().to_vec(),
            upper: bounds.upper().values().to_vec(),
        },
    }
}
