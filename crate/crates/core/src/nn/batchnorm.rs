use super::Parameter;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-unit batch normalization over the batch dimension.
///
/// Train mode normalizes with batch statistics and updates the running
/// averages as `r <- momentum * r + (1 - momentum) * stat`. Infer mode
/// normalizes with the running averages.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Parameter<T>,
    pub beta: Parameter<T>,
    pub running_mean: Vec<T>,
    pub running_var: Vec<T>,
    pub momentum: T,
    pub eps: T,
    pub mode: Mode,
}

/// Saved activations from a train-mode forward pass.
#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
}

impl<T: Real> BatchNorm<T> {
    pub const DEFAULT_MOMENTUM: f64 = 0.99;
    pub const DEFAULT_EPS: f64 = 1e-3;

    pub fn new(units: usize) -> Self {
        Self::with_hyper(units, T::lit(Self::DEFAULT_MOMENTUM), T::lit(Self::DEFAULT_EPS))
    }

    pub fn with_hyper(units: usize, momentum: T, eps: T) -> Self {
        Self {
            gamma: Parameter::new(Tensor::full(&[units], T::one())),
            beta: Parameter::new(Tensor::zeros(&[units])),
            running_mean: vec![T::zero(); units],
            running_var: vec![T::one(); units],
            momentum,
            eps,
            mode: Mode::Train,
        }
    }

    pub fn units(&self) -> usize {
        self.gamma.len()
    }

    /// 2n trainable plus 2n running statistics.
    pub fn param_count(&self) -> usize {
        4 * self.units()
    }

    pub fn trainable_count(&self) -> usize {
        2 * self.units()
    }

    pub fn forward(&mut self, x: &Tensor<T>) -> Result<(Tensor<T>, Option<BatchNormCache<T>>)> {
        let (n, units) = (x.rows(), x.cols());
        if units != self.units() {
            return Err(Error::Shape(format!("batch-norm over {} units got {units}", self.units())));
        }
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        match self.mode {
            Mode::Infer => Ok((self.infer(x)?, None)),
            Mode::Train => {
                if n < 2 {
                    return Err(Error::Usage(format!(
                        "batch-norm in train mode needs a batch of at least 2, got {n}"
                    )));
                }
                let nf = T::from_usize_lossy(n);
                let mean: Vec<T> = x.column_sums().into_iter().map(|s| s / nf).collect();
                let mut var = vec![T::zero(); units];
                for r in 0..n {
                    for (j, &v) in x.row(r).iter().enumerate() {
                        let d = v - mean[j];
                        var[j] += d * d;
                    }
                }
                var.iter_mut().for_each(|v| *v /= nf);
                let inv_std: Vec<T> = var.iter().map(|&v| T::one() / (v + self.eps).sqrt()).collect();

                let mut xhat = x.clone();
                for r in 0..n {
                    for (j, v) in xhat.row_mut(r).iter_mut().enumerate() {
                        *v = (*v - mean[j]) * inv_std[j];
                    }
                }
                let mut y = xhat.clone();
                for r in 0..n {
                    for (j, v) in y.row_mut(r).iter_mut().enumerate() {
                        *v = *v * gamma[j] + beta[j];
                    }
                }
                let keep = self.momentum;
                let blend = T::one() - keep;
                for j in 0..units {
                    self.running_mean[j] = keep * self.running_mean[j] + blend * mean[j];
                    self.running_var[j] = keep * self.running_var[j] + blend * var[j];
                }
                Ok((y, Some(BatchNormCache { xhat, inv_std })))
            }
        }
    }

    /// Normalizes with the running statistics regardless of `mode`.
    pub fn infer(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let units = x.cols();
        if units != self.units() {
            return Err(Error::Shape(format!("batch-norm over {} units got {units}", self.units())));
        }
        let gamma = self.gamma.value.data();
        let beta = self.beta.value.data();
        let scale: Vec<T> = (0..units)
            .map(|j| gamma[j] / (self.running_var[j] + self.eps).sqrt())
            .collect();
        let mut y = x.clone();
        for r in 0..x.rows() {
            for (j, v) in y.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.running_mean[j]) * scale[j] + beta[j];
            }
        }
        Ok(y)
    }

    /// Exact gradient of the train-mode forward; stores `dgamma`, `dbeta`.
    pub fn backward(&mut self, cache: Option<&BatchNormCache<T>>, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (dx, dgamma, dbeta) = self.gradients(cache, dy)?;
        self.gamma.grad = dgamma;
        self.beta.grad = dbeta;
        Ok(dx)
    }

    /// Returns `(dx, dgamma, dbeta)` without storing anything.
    pub fn gradients(
        &self,
        cache: Option<&BatchNormCache<T>>,
        dy: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let cache = match (self.mode, cache) {
            (Mode::Train, Some(c)) => c,
            _ => return Err(Error::Usage("batch-norm backward requires a train-mode forward".into())),
        };
        let (n, units) = (dy.rows(), dy.cols());
        if cache.xhat.shape() != dy.shape() {
            return Err(Error::Shape(format!(
                "batch-norm backward: cache {:?}, dy {:?}",
                cache.xhat.shape(),
                dy.shape()
            )));
        }
        let gamma = self.gamma.value.data();
        let mut dgamma = vec![T::zero(); units];
        let mut dbeta = vec![T::zero(); units];
        for r in 0..n {
            for (j, (&g, &xh)) in dy.row(r).iter().zip(cache.xhat.row(r)).enumerate() {
                dgamma[j] += g * xh;
                dbeta[j] += g;
            }
        }
        // dxhat = dy * gamma; sum(dxhat) = gamma * dbeta; sum(dxhat * xhat) = gamma * dgamma
        let nf = T::from_usize_lossy(n);
        let mut dx = dy.clone();
        for r in 0..n {
            let xh = cache.xhat.row(r);
            for (j, v) in dx.row_mut(r).iter_mut().enumerate() {
                let dxhat = *v * gamma[j];
                *v = cache.inv_std[j] / nf
                    * (nf * dxhat - gamma[j] * dbeta[j] - xh[j] * gamma[j] * dgamma[j]);
            }
        }
        Ok((dx, Tensor::from_vec(&[units], dgamma)?, Tensor::from_vec(&[units], dbeta)?))
    }
}
