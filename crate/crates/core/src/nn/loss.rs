use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tensor::Tensor;

/// Reconstruction norm; both are reduced by the mean over every element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Norm {
    L1,
    L2Sq,
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::L2Sq => "l2sq",
        })
    }
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "mae" => Ok(Norm::L1),
            "l2sq" | "l2" | "mse" => Ok(Norm::L2Sq),
            other => Err(Error::validation(format!("unknown norm `{other}` (expected l1 or l2sq)"))),
        }
    }
}

impl Norm {
    fn elem<T: Real>(self, d: T) -> T {
        match self {
            Norm::L1 => d.abs(),
            Norm::L2Sq => d * d,
        }
    }

    fn elem_grad<T: Real>(self, d: T) -> T {
        match self {
            Norm::L1 => {
                if d > T::zero() {
                    T::one()
                } else if d < T::zero() {
                    -T::one()
                } else {
                    T::zero()
                }
            }
            Norm::L2Sq => d + d,
        }
    }
}

/// Mean loss over all elements and its gradient with respect to `pred`.
pub fn loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>, norm: Norm) -> Result<(T, Tensor<T>)> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!("loss: pred {:?}, target {:?}", pred.shape(), target.shape())));
    }
    let n = T::from_usize_lossy(pred.len().max(1));
    let mut total = T::zero();
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        let d = *g - t;
        total += norm.elem(d);
        *g = norm.elem_grad(d) / n;
    }
    Ok((total / n, grad))
}

/// Mean loss of each row (sample) separately.
pub fn per_sample_loss<T: Real>(pred: &Tensor<T>, target: &Tensor<T>, norm: Norm) -> Result<Vec<T>> {
    if pred.shape() != target.shape() {
        return Err(Error::Shape(format!("loss: pred {:?}, target {:?}", pred.shape(), target.shape())));
    }
    let c = T::from_usize_lossy(pred.cols().max(1));
    Ok((0..pred.rows())
        .map(|r| {
            pred.row(r).iter().zip(target.row(r)).map(|(&p, &t)| norm.elem(p - t)).sum::<T>() / c
        })
        .collect())
}
