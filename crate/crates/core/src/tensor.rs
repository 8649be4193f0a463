//! Dense row-major f64 tensor.
//!
//! The whole crate works in 64-bit floats on `[0,1]`-normalized pixels.
//! Shapes follow batch-first layout: images are `[N, H, W, C]`, affine
//! activations `[N, features]`. Public constructors reject non-finite
//! values; operations elsewhere in the crate preserve finiteness (losses
//! are computed in log-space, so even extreme logits stay finite).

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    values: Vec<f64>,
}

impl Tensor {
    /// Build a tensor, validating element count and finiteness.
    pub fn new(shape: Vec<usize>, values: Vec<f64>) -> Result<Tensor> {
        let expected: usize = shape.iter().product();
        if expected != values.len() {
            return Err(Error::ShapeMismatch {
                expected: vec![expected],
                actual: vec![values.len()],
                context: "tensor construction",
            });
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "tensor construction",
            });
        }
        Ok(Tensor { shape, values })
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape,
            values: vec![0.0; n],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Leading dimension, i.e. the batch size for batch-first tensors.
    pub fn num_samples(&self) -> usize {
        *self.shape.first().unwrap_or(&0)
    }

    /// Elements per sample (product of the non-batch dimensions).
    pub fn sample_len(&self) -> usize {
        if self.shape.is_empty() || self.shape[0] == 0 {
            0
        } else {
            self.values.len() / self.shape[0]
        }
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let w = self.sample_len();
        &self.values[i * w..(i + 1) * w]
    }

    pub(crate) fn sample_mut(&mut self, i: usize) -> &mut [f64] {
        let w = self.sample_len();
        &mut self.values[i * w..(i + 1) * w]
    }

    /// Copy the selected samples into a new batch (same per-sample shape).
    pub fn gather(&self, indices: &[usize]) -> Tensor {
        let w = self.sample_len();
        let mut values = Vec::with_capacity(indices.len() * w);
        for &i in indices {
            values.extend_from_slice(self.sample(i));
        }
        let mut shape = self.shape.clone();
        shape[0] = indices.len();
        Tensor { shape, values }
    }

    /// One sample as a batch of one.
    pub fn single(&self, i: usize) -> Tensor {
        self.gather(&[i])
    }

    /// One sample with the batch axis dropped (batch tensors only).
    pub fn unbatched(&self, i: usize) -> Tensor {
        Tensor {
            shape: self.shape[1..].to_vec(),
            values: self.sample(i).to_vec(),
        }
    }

    pub(crate) fn same_shape(&self, other: &Tensor) -> bool {
        self.shape == other.shape
    }

    pub fn assert_finite(&self, context: &'static str) -> Result<()> {
        if self.values.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite { context })
        }
    }
}

/// Index of the row maximum; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}
