use rand::Rng;

use super::Parameter;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Affine layer `y = x W^T + b` with `W: out x in`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    pub weight: Parameter<T>,
    pub bias: Parameter<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Real> Dense<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (inputs + outputs) as f64).sqrt();
        let w = (0..inputs * outputs)
            .map(|_| T::from_f64_lossy(rng.random_range(-limit..limit)))
            .collect();
        Self::from_parts(
            Tensor::from_vec(&[outputs, inputs], w).expect("shape"),
            Tensor::zeros(&[outputs]),
        )
        .expect("shape")
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        if weight.shape().len() != 2 || bias.len() != weight.rows() {
            return Err(Error::Shape(format!(
                "dense weight {:?} with bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weight: Parameter::new(weight), bias: Parameter::new(bias) })
    }

    pub fn inputs(&self) -> usize {
        self.weight.value.cols()
    }

    pub fn outputs(&self) -> usize {
        self.weight.value.rows()
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        if x.cols() != self.inputs() {
            return Err(Error::Shape(format!(
                "dense expects {} inputs, got {}",
                self.inputs(),
                x.cols()
            )));
        }
        let mut y = x.matmul_nt(&self.weight.value)?;
        let b = self.bias.value.data();
        for r in 0..y.rows() {
            for (v, &bj) in y.row_mut(r).iter_mut().zip(b) {
                *v += bj;
            }
        }
        Ok(y)
    }

    /// Stores `dW`, `db` in the parameter gradients; returns `dX` when asked.
    pub fn backward(&mut self, x: &Tensor<T>, dy: &Tensor<T>, want_dx: bool) -> Result<Option<Tensor<T>>> {
        check_backward_shapes(self, x, dy)?;
        self.weight.grad = dy.matmul_tn(x)?;
        self.bias.grad = Tensor::from_vec(&[self.outputs()], dy.column_sums())?;
        if want_dx {
            Ok(Some(dy.matmul(&self.weight.value)?))
        } else {
            Ok(None)
        }
    }
}

fn check_backward_shapes<T: Real>(layer: &Dense<T>, x: &Tensor<T>, dy: &Tensor<T>) -> Result<()> {
    if x.cols() != layer.inputs() || dy.cols() != layer.outputs() || x.rows() != dy.rows() {
        return Err(Error::Shape(format!(
            "dense backward: layer {}->{}, x {:?}, dy {:?}",
            layer.inputs(),
            layer.outputs(),
            x.shape(),
            dy.shape()
        )));
    }
    Ok(())
}

/// Gradients of the affine map without touching the layer.
pub fn dense_backward<T: Real>(layer: &Dense<T>, x: &Tensor<T>, dy: &Tensor<T>) -> Result<DenseGrads<T>> {
    check_backward_shapes(layer, x, dy)?;
    Ok(DenseGrads {
        dx: dy.matmul(&layer.weight.value)?,
        dw: dy.matmul_tn(x)?,
        db: Tensor::from_vec(&[layer.outputs()], dy.column_sums())?,
    })
}
