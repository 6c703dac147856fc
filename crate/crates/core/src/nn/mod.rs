//! Hand-differentiated dense network layers and the Adam optimizer.
//!
//! Each layer exposes an explicit `forward`/`backward` pair; the IDCAE
//! topology is fixed, so there is no autograd graph.

mod activation;
mod adam;
mod batchnorm;
mod dense;
mod loss;

pub use activation::{relu_backward, relu_forward, sigmoid_backward, sigmoid_forward};
pub use adam::{AdamConfig, AdamState, LrSchedule};
pub use batchnorm::{BatchNorm, BatchNormCache, Mode};
pub use dense::{dense_backward, Dense, DenseGrads};
pub use loss::{loss, per_sample_loss, Norm};

use crate::scalar::Real;
use crate::tensor::Tensor;

/// A trainable tensor together with its gradient buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter<T> {
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Real> Parameter<T> {
    pub fn new(value: Tensor<T>) -> Self {
        let grad = Tensor::zeros(value.shape());
        Self { value, grad }
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}
